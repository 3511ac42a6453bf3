#ifndef TTOBS_IONTRAP_HPP
#define TTOBS_IONTRAP_HPP

#include <optional>
#include <vector>

#include "ttobs/operators.hpp"
#include "ttobs/protocols.hpp"

namespace ttobs {

// Trapped Ca+ model parameters (SI). All internal computations use
// dimensionless units: energies in hbar*omega, lengths in 1/k_sw.
struct IonParams {
    double omega;    // rad/s
    double omega_z;  // rad/s
    double delta_s;  // rad/s
    double k_sw;     // 1/m
    double mass;     // kg
    double hbar;     // J s
    static IonParams reference();  // the standard parameter point
};

struct FockTruncation {
    int n_max = 64;  // Fock levels 0..n_max
};

struct IonDerived {
    double a_len;     // spin-dependent displacement, m
    double sigma_x;   // ground-state width sqrt(hbar/2 m omega), m
    double lambda;    // Poisson mean a^2/sigma^2 = hbar delta_s^2 k_sw^2/(2 m omega^3)
    double tau;       // half period pi/omega, s
    double abar;      // k_sw * a_len
    double sigbar;    // k_sw * sigma_x
};

IonDerived ion_derived(const IonParams& p);

// Fock (x) spin operators; basis index = n*2 + s with s = 0 -> |+>,
// s = 1 -> |->. Matrices are dimensionless (energy unit hbar*omega).
struct IonModel {
    int n_max;
    int dim;  // 2*(n_max+1)
    IonDerived derived;
    Matrix x, p, num;          // oscillator factor, (n_max+1) square
    Matrix h_ho, h_e, h;       // full space
    Matrix u_tau;              // exp(-i pi h)
    double leakage(const Vector& psi) const;  // population of top two Fock levels
};

IonModel model_operators(const IonParams& p, const FockTruncation& t);

Vector fock_spin_state(int n_max, int n, int spin_sign);
Vector coherent_spin_state(int n_max, Complex alpha, int spin_sign);

// Hermite polynomial H_n by the three-term recurrence; throws on overflow.
double hermite(int n, double x);
struct ScaledReal {
    double log_abs;  // -inf encodes zero
    int sign;
};
ScaledReal hermite_scaled(int n, double x);          // overflow-safe fallback
double hermite_explicit_sum(int n, double x);        // direct sum, n <= 20

// Kummer confluent hypergeometric 1F1(a; b; x) by power series, x >= 0.
double kummer_1f1(double a, double b, double x);

// f(n, s, a, sigma) = integral exp(-(x+a)^2/(2 sigma^2)) x^(n-2s) dx via the
// Gamma/1F1 closed form; with check=true the value is validated against
// adaptive quadrature (1e-8 relative) and a mismatch throws.
double f_integral(int n, int s, double a, double sigma, bool check = false);
double f_integral_quadrature(int n, int s, double a, double sigma);

double poisson_lambda(const IonParams& p);
double poisson_pmf(double lambda, int n);

// |<n| U_tau^+ |0>|^2 via the Hermite/1F1 closed form.
double tpm_hho_probability(const IonParams& p, int n);

struct GaussianDescriptor {
    double mean;  // hbar*omega units
    double sd;
};

// TPM distribution of the H_e variation for the |0,+> preparation:
// Gaussian descriptor plus masses over the intervals
// I_n^- = [-(n+1/2), -(n-1/2)] and I_n^+ = [(n-1/2), (n+1/2)] (hbar*omega).
struct HeTpmResult {
    GaussianDescriptor gauss;
    std::vector<double> mass_minus;  // index n = 0.. (I_0 shared between both)
    std::vector<double> mass_plus;
};
HeTpmResult tpm_he_distribution(const IonParams& p, int n_bins = 8);

double gaussian_interval_mass(const GaussianDescriptor& g, double lo, double hi);

// OBS distribution of the H_HO variation for |alpha,->: Gaussian in
// hbar*omega units, mean lambda - 2 sqrt(lambda) Re(alpha), sd sqrt(lambda).
GaussianDescriptor obs_coherent_distribution(const IonParams& p, Complex alpha);

struct Fig5Record {
    Complex alpha, alpha_prime;
    double sigma_delta;        // hbar*omega units
    double sigma_h1_0;         // |alpha|
    double sigma_h1_tau;       // |alpha'|
    double commutator_bound;   // |<[H1(tau), H1(0)]>| / (hbar omega)^2
    double slack;              // Eq.-of-interest inequality slack
    double poisson_mean_0;     // |alpha|^2
    double poisson_mean_tau;   // |alpha'|^2
    GaussianDescriptor he_t0, he_tau;
    double caption_identity_rel_err;  // |2*0.243*20 - 9.707| / 9.707
};
Fig5Record fig5_quantities(const IonParams& p, Complex alpha);

// Exactly commuting grid projection of the H_e story: H_e diagonal on two
// spin-resolved position grids, U the half-period reflection permutation.
// [H1, U^dag H1 U] = 0 holds to rounding, so TPM = OBS is exact on it.
struct GridInstance {
    HermitianOp h_e;
    HermitianOp h1;       // h_total - h_e
    HermitianOp h_total;  // multiple of the identity
    UnitaryOp u;
    DensityState rho0;    // ground-state-like |psi_0, +>
    int points_per_block;
};
GridInstance he_grid_instance(const IonParams& p, int half_points = 32,
                              double spacing_over_sigma = 0.25);

}  // namespace ttobs

#endif
