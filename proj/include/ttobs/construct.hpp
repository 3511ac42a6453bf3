#ifndef TTOBS_CONSTRUCT_HPP
#define TTOBS_CONSTRUCT_HPP

#include <optional>
#include <vector>

#include "ttobs/protocols.hpp"

namespace ttobs {

// Auxiliary eigenphase, either an exact rational multiple of 2*pi
// (canonicalized to 0 <= num < den, gcd(num, den) = 1) or float radians
// wrapped to [0, 2*pi). Rational phases support exact mod-2*pi arithmetic,
// which is what the phase-matching tests of the construction run on.
class Phase {
  public:
    static Phase rational(long long num, long long den);
    static Phase radians(double r);

    bool is_rational() const { return rational_; }
    long long num() const { return num_; }
    long long den() const { return den_; }
    double radians_value() const;

    Phase operator+(const Phase& o) const;
    Phase operator-(const Phase& o) const;
    Phase scaled(long long factor) const;

    // Equality mod 2*pi: exact for rational pairs, within float_tol otherwise.
    bool same_value(const Phase& o, double float_tol = 1e-10) const;

  private:
    bool rational_ = false;
    long long num_ = 0, den_ = 1;
    double rad_ = 0.0;
};

std::optional<Phase> recognize_rational_phase(double radians, long long max_den,
                                              double tol = 1e-9);

// Truncated auxiliary phase set Theta' produced by the permutation
// algorithm: level-l block enumerates all sums sum_j i_j * theta_j with
// |i_j| <= l over the first l entries of the (cyclically extended) input.
struct PhaseLattice {
    int level = 0;
    std::vector<Phase> phases;              // entries 1..k_{level+1}-1, stored 0-based
    std::vector<std::vector<int>> coeffs;   // source coefficient vector per entry

    // 1-based block start indices: k_1 = 1, k_2 = 4, k_3 = 29, ...
    static long long k_index(int l);
};

PhaseLattice permutation_phases(const std::vector<Phase>& theta, int l_max,
                                long long max_entries = 20000);

// Smallest 0-based lattice index l with theta'_l + theta_k = theta'_j +
// theta_m (mod 2*pi), or nullopt when the truncated lattice has no match.
std::optional<long long> coverage_level(const std::vector<Phase>& theta,
                                        const PhaseLattice& lattice, int m, int k, long long j,
                                        double float_tol = 1e-10);

struct ProbeVector {
    Vector beta;      // normalized components over the truncated aux space
    Complex alpha_v;  // amplitude parameter the phases were derived from
};

// Lemma-3 probe: coherent-state magnitudes with the eta in {0, pi/4} phase
// rule, truncated and renormalized. Every retained component must keep
// nonzero real and imaginary parts; too-deep truncations fail.
ProbeVector build_probe_vector(int dim_aux, Complex alpha_v);

enum class PhaseMode { Rational, Float };

struct FillOptions {
    PhaseMode mode = PhaseMode::Rational;
    int l_max = 3;                 // deepening cap
    Complex alpha_v = {1.0, 0.5};
    double e_i = 1.0;              // free target eigenvalue, paper fixes only E' = E - delta_i
    long long max_den = 64;        // rational phase recognition cap
    double float_tol = 1e-10;
    long long max_product_dim = 4096;
};

struct Result2Certificate {
    UnitaryOp u_prime;   // diagonal in the canonical aux basis
    HermitianOp h2;      // on the product space, computational basis
    ProbeVector v;
    Vector delta_vec;    // target eigenvector of Delta(H1, U)
    double delta_i = 0.0;
    double e_i = 0.0;
    double e_i_prime = 0.0;
    double r_comm = 0.0;
    double r_eig0 = 0.0;
    double r_eigt = 0.0;
    int level = 0;                // lattice level actually used
    PhaseMode mode = PhaseMode::Rational;
    long long assigned_free = 0;  // ledger: free variables given a value
    long long defaulted_free = 0; // matched components left at zero
};

// Constructs (U', H2, |v>) for the target Delta-eigenvector (index into the
// ascending eigensystem of Delta(H1, U)) and returns the machine-checkable
// certificate. Deepens the lattice level until coverage is achieved or
// opts.l_max is exhausted (CoverageError).
Result2Certificate fill_h2(const HermitianOp& h1, const UnitaryOp& u, int target,
                           const FillOptions& opts = {});

struct CertificateCheck {
    double r_comm = 0.0;
    double r_eig0 = 0.0;
    double r_eigt = 0.0;
    double herm_defect = 0.0;
    double unit_defect = 0.0;
    double e_relation_error = 0.0;  // |E' - (E - delta_i)|
    double target_eig_residual = 0.0;
    double probe_min_component = 0.0;  // min over components of min(|Re|, |Im|)
    bool passed = false;
};

// Recomputes the three residuals and the E' = E - delta_i relation from the
// stored matrices, independently of how fill_h2 assigned its variables.
CertificateCheck verify_certificate(const Result2Certificate& cert, const HermitianOp& h1,
                                    const UnitaryOp& u, double tol = 1e-8);

struct ProbeReport {
    OutcomeDistribution dist;       // inferred Delta(H1, U) distribution
    double tv_to_obs = 0.0;
    double comm_uh2u_h2 = 0.0;      // ||[U^dag H2 U, H2]||_F
    double comm_delta_h2 = 0.0;     // ||[Delta(H1,U), H2]||_F
    double comm_total_u = 0.0;      // ||[H_total, U]||_F (informational)
};

// SM-style special case: when H2 = H_total - H1 commutes with its own
// Heisenberg evolution and with Delta(H1, U), measuring H2 at both times
// reproduces the OBS statistics of Delta(H1, U). Returns nullopt when the
// commutation gate (1e-9) fails.
std::optional<ProbeReport> special_case_probe(const HermitianOp& h_total, const HermitianOp& h1,
                                              const UnitaryOp& u, const DensityState& rho);

}  // namespace ttobs

#endif
