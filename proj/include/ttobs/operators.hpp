#ifndef TTOBS_OPERATORS_HPP
#define TTOBS_OPERATORS_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <utility>

#include "ttobs/errors.hpp"

namespace ttobs {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

// Construction-time defect bounds. Inputs worse than these are rejected;
// anything below is silently symmetrized / accepted with the defect recorded.
inline constexpr double kHermTol = 1e-10;
inline constexpr double kUnitTol = 1e-10;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kEigRecTol = 1e-9;
inline constexpr int kMaxDim = 4096;

inline double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

void require_square(const Matrix& a, const char* what);

// Hermitian operator. (A + A^dagger)/2 is applied at construction, the
// distance to the input is recorded so callers can reject garbage.
class HermitianOp {
  public:
    explicit HermitianOp(const Matrix& a);
    const Matrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }
    double herm_defect() const { return defect_; }

  private:
    Matrix m_;
    double defect_;
};

class UnitaryOp {
  public:
    explicit UnitaryOp(const Matrix& u);
    const Matrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }
    double unit_defect() const { return defect_; }

  private:
    Matrix m_;
    double defect_;
};

class DensityState {
  public:
    explicit DensityState(const Matrix& rho);
    static DensityState pure(const Vector& psi);
    const Matrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }

  private:
    Matrix m_;
};

// Result of a Hermitian eigendecomposition: ascending real eigenvalues,
// orthonormal columns, reconstruction defect recorded.
struct EigenSystem {
    RealVector values;
    Matrix vectors;
    double reconstruction_defect = 0.0;
};

// Unitary eigendecomposition: unit-modulus eigenvalues sorted by phase
// in [0, 2pi).
struct UnitaryEigenSystem {
    Vector values;
    RealVector phases;
    Matrix vectors;
    double reconstruction_defect = 0.0;
};

Matrix tensor(const Matrix& a, const Matrix& b, int max_dim = kMaxDim);

enum class Keep { A, B };
Matrix partial_trace(const Matrix& a, int dim_a, int dim_b, Keep keep);

EigenSystem herm_eig(const HermitianOp& h);
UnitaryEigenSystem unitary_eig(const UnitaryOp& u);

// exp(i * scale * H) through the eigendecomposition of H.
UnitaryOp mat_exp_i(const HermitianOp& h, double scale);

// Deterministic RNG used project-wide. Gaussian variates are produced by
// an explicit Box-Muller on the raw mt19937_64 stream, so sequences do not
// depend on the standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform();  // [0, 1)
    double gaussian();
    Complex cgaussian() { return {gaussian(), gaussian()}; }
    std::uint64_t raw() { return gen_(); }

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

Matrix random_hermitian(int dim, Rng& rng);
Matrix random_unitary(int dim, Rng& rng);  // Haar (QR with phase fix)
Vector random_pure_state(int dim, Rng& rng);
Matrix random_density(int dim, Rng& rng);

std::pair<HermitianOp, UnitaryOp> random_instance(int dim, std::uint64_t seed);

// (H1, H2) with H2 = T - H1 where T is a random real polynomial in
// U + U^dagger and i(U - U^dagger), so [H1 + H2, U] = 0 to rounding.
std::pair<HermitianOp, HermitianOp> conserved_pair(const UnitaryOp& u, std::uint64_t seed);

double commutator_norm(const Matrix& a, const Matrix& b);

}  // namespace ttobs

#endif
