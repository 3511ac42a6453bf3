#include "ttobs/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace ttobs {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_finite(const Matrix& a, const char* what) {
    if (!a.allFinite()) throw NumericalError(std::string(what) + ": non-finite entries");
}

// Deterministic phase convention: rotate each column so its largest entry
// is real positive. Keeps repeated runs byte-identical.
void fix_column_phases(Matrix& v) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        Eigen::Index imax = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < v.rows(); ++r) {
            double m = std::abs(v(r, c));
            if (m > best + 1e-14) {
                best = m;
                imax = r;
            }
        }
        Complex z = v(imax, c);
        if (std::abs(z) > 0) v.col(c) *= std::conj(z) / std::abs(z);
    }
}

bool column_lex_less(const Matrix& v, Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        Complex x = v(r, a), y = v(r, b);
        if (x.real() != y.real()) return x.real() < y.real();
        if (x.imag() != y.imag()) return x.imag() < y.imag();
    }
    return false;
}

}  // namespace

void require_square(const Matrix& a, const char* what) {
    if (a.rows() != a.cols())
        throw DimensionError(std::string(what) + ": matrix is not square (" +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ")");
    if (a.rows() == 0) throw DimensionError(std::string(what) + ": empty matrix");
}

HermitianOp::HermitianOp(const Matrix& a) {
    require_square(a, "HermitianOp");
    require_finite(a, "HermitianOp");
    defect_ = max_abs(a - a.adjoint());
    if (defect_ > kHermTol)
        throw PreconditionError("HermitianOp: hermiticity defect " + std::to_string(defect_) +
                                " exceeds " + std::to_string(kHermTol));
    m_ = 0.5 * (a + Matrix(a.adjoint()));
}

UnitaryOp::UnitaryOp(const Matrix& u) {
    require_square(u, "UnitaryOp");
    require_finite(u, "UnitaryOp");
    Matrix g = u.adjoint() * u;
    g.diagonal().array() -= 1.0;
    defect_ = max_abs(g);
    if (defect_ > kUnitTol)
        throw PreconditionError("UnitaryOp: unitarity defect " + std::to_string(defect_) +
                                " exceeds " + std::to_string(kUnitTol));
    m_ = u;
}

DensityState::DensityState(const Matrix& rho) {
    require_square(rho, "DensityState");
    require_finite(rho, "DensityState");
    if (max_abs(rho - rho.adjoint()) > kHermTol)
        throw PreconditionError("DensityState: not Hermitian within tolerance");
    double tr = rho.trace().real();
    if (std::abs(tr - 1.0) > kTraceTol)
        throw PreconditionError("DensityState: trace " + std::to_string(tr) + " != 1");
    Matrix h = 0.5 * (rho + Matrix(rho.adjoint()));
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kTraceTol)
        throw PreconditionError("DensityState: negative eigenvalue " +
                                std::to_string(es.eigenvalues().minCoeff()));
    m_ = h;
}

DensityState DensityState::pure(const Vector& psi) {
    double n = psi.norm();
    if (n == 0.0) throw PreconditionError("DensityState::pure: zero vector");
    Vector v = psi / n;
    return DensityState(v * v.adjoint());
}

Matrix tensor(const Matrix& a, const Matrix& b, int max_dim) {
    require_square(a, "tensor");
    require_square(b, "tensor");
    long dim = a.rows() * b.rows();
    if (dim > max_dim)
        throw InstanceTooLargeError("tensor: product dimension " + std::to_string(dim) +
                                    " exceeds cap " + std::to_string(max_dim));
    Matrix out(dim, dim);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Matrix partial_trace(const Matrix& a, int dim_a, int dim_b, Keep keep) {
    require_square(a, "partial_trace");
    if (a.rows() != static_cast<long>(dim_a) * dim_b)
        throw DimensionError("partial_trace: dim " + std::to_string(a.rows()) + " != " +
                             std::to_string(dim_a) + "*" + std::to_string(dim_b));
    if (keep == Keep::A) {
        Matrix out = Matrix::Zero(dim_a, dim_a);
        for (int i = 0; i < dim_a; ++i)
            for (int j = 0; j < dim_a; ++j)
                for (int k = 0; k < dim_b; ++k) out(i, j) += a(i * dim_b + k, j * dim_b + k);
        return out;
    }
    Matrix out = Matrix::Zero(dim_b, dim_b);
    for (int i = 0; i < dim_b; ++i)
        for (int j = 0; j < dim_b; ++j)
            for (int k = 0; k < dim_a; ++k) out(i, j) += a(k * dim_b + i, k * dim_b + j);
    return out;
}

EigenSystem herm_eig(const HermitianOp& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix());
    if (es.info() != Eigen::Success)
        throw NumericalError("herm_eig: eigensolver did not converge");
    EigenSystem out;
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
    fix_column_phases(out.vectors);

    // Ascending values; exact ties broken lexicographically on the vectors.
    const Eigen::Index n = out.values.size();
    std::vector<Eigen::Index> idx(n);
    for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (out.values[a] != out.values[b]) return out.values[a] < out.values[b];
        return column_lex_less(out.vectors, a, b);
    });
    RealVector vals(n);
    Matrix vecs(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        vals[i] = out.values[idx[i]];
        vecs.col(i) = out.vectors.col(idx[i]);
    }
    out.values = vals;
    out.vectors = vecs;

    double hn = h.matrix().norm();
    Matrix rec = out.vectors * out.values.asDiagonal() * out.vectors.adjoint();
    out.reconstruction_defect = (h.matrix() - rec).norm() / std::max(1.0, hn);
    if (out.reconstruction_defect > kEigRecTol)
        throw NumericalError("herm_eig: reconstruction defect " +
                             std::to_string(out.reconstruction_defect));
    return out;
}

UnitaryEigenSystem unitary_eig(const UnitaryOp& u) {
    // Diagonalize the Hermitian part C = (U + U^dagger)/2, then the
    // anti-Hermitian part S = (U - U^dagger)/(2i) inside degenerate C blocks.
    // C and S commute for unitary U, so the joint basis diagonalizes U.
    const Matrix& um = u.matrix();
    const Eigen::Index n = um.rows();
    Matrix c = 0.5 * (um + Matrix(um.adjoint()));
    Matrix s = Complex(0, -0.5) * (um - Matrix(um.adjoint()));
    EigenSystem ec = herm_eig(HermitianOp(c));

    Matrix vecs(n, n);
    double cluster_tol = 1e-8 * std::max(1.0, ec.values.cwiseAbs().maxCoeff());
    Eigen::Index start = 0;
    while (start < n) {
        Eigen::Index stop = start + 1;
        while (stop < n && ec.values[stop] - ec.values[stop - 1] < cluster_tol) ++stop;
        Eigen::Index w = stop - start;
        if (w == 1) {
            vecs.col(start) = ec.vectors.col(start);
        } else {
            Matrix vb = ec.vectors.middleCols(start, w);
            Matrix sb = vb.adjoint() * s * vb;
            EigenSystem eb = herm_eig(HermitianOp(sb));
            vecs.middleCols(start, w) = vb * eb.vectors;
        }
        start = stop;
    }
    fix_column_phases(vecs);

    UnitaryEigenSystem out;
    out.vectors = vecs;
    out.values = Vector(n);
    out.phases = RealVector(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Complex lam = vecs.col(i).dot(um * vecs.col(i));  // Rayleigh quotient
        if (std::abs(std::abs(lam) - 1.0) > kEigRecTol)
            throw NumericalError("unitary_eig: eigenvalue off the unit circle by " +
                                 std::to_string(std::abs(std::abs(lam) - 1.0)));
        lam /= std::abs(lam);
        double ph = std::arg(lam);
        if (ph < 0) ph += kTwoPi;
        if (ph >= kTwoPi) ph -= kTwoPi;
        out.values[i] = lam;
        out.phases[i] = ph;
    }

    std::vector<Eigen::Index> idx(n);
    for (Eigen::Index i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (out.phases[a] != out.phases[b]) return out.phases[a] < out.phases[b];
        return column_lex_less(out.vectors, a, b);
    });
    UnitaryEigenSystem sorted;
    sorted.values = Vector(n);
    sorted.phases = RealVector(n);
    sorted.vectors = Matrix(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        sorted.values[i] = out.values[idx[i]];
        sorted.phases[i] = out.phases[idx[i]];
        sorted.vectors.col(i) = out.vectors.col(idx[i]);
    }
    Matrix rec = sorted.vectors * sorted.values.asDiagonal() * sorted.vectors.adjoint();
    sorted.reconstruction_defect = (um - rec).norm() / std::max(1.0, um.norm());
    if (sorted.reconstruction_defect > kEigRecTol)
        throw NumericalError("unitary_eig: reconstruction defect " +
                             std::to_string(sorted.reconstruction_defect));
    return sorted;
}

UnitaryOp mat_exp_i(const HermitianOp& h, double scale) {
    EigenSystem es = herm_eig(h);
    Vector phases(es.values.size());
    for (Eigen::Index i = 0; i < es.values.size(); ++i)
        phases[i] = std::polar(1.0, scale * es.values[i]);
    Matrix u = es.vectors * phases.asDiagonal() * es.vectors.adjoint();
    return UnitaryOp(u);
}

double Rng::uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    have_spare_ = true;
    spare_ = r * std::sin(kTwoPi * u2);
    return r * std::cos(kTwoPi * u2);
}

Matrix random_hermitian(int dim, Rng& rng) {
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = rng.cgaussian();
    return 0.5 * (g + Matrix(g.adjoint()));
}

Matrix random_unitary(int dim, Rng& rng) {
    // QR of a complex Gaussian matrix; the R-diagonal phase fix makes the
    // result Haar distributed.
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = rng.cgaussian();
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < dim; ++i) {
        Complex d = r(i, i);
        q.col(i) *= (std::abs(d) > 0) ? d / std::abs(d) : Complex(1, 0);
    }
    return q;
}

Vector random_pure_state(int dim, Rng& rng) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = rng.cgaussian();
    return v / v.norm();
}

Matrix random_density(int dim, Rng& rng) {
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = rng.cgaussian();
    Matrix rho = g * g.adjoint();
    return rho / rho.trace().real();
}

std::pair<HermitianOp, UnitaryOp> random_instance(int dim, std::uint64_t seed) {
    if (dim < 2 || dim > kMaxDim)
        throw InstanceTooLargeError("random_instance: dim " + std::to_string(dim) +
                                    " outside [2, " + std::to_string(kMaxDim) + "]");
    Rng rng(seed);
    Matrix h = random_hermitian(dim, rng);
    Matrix u = random_unitary(dim, rng);
    return {HermitianOp(h), UnitaryOp(u)};
}

std::pair<HermitianOp, HermitianOp> conserved_pair(const UnitaryOp& u, std::uint64_t seed) {
    Rng rng(seed);
    const int dim = u.dim();
    Matrix a = u.matrix() + Matrix(u.matrix().adjoint());
    Matrix b = Complex(0, 1) * (u.matrix() - Matrix(u.matrix().adjoint()));
    // T = sum of random real coefficients times A^p B^q, total degree <= 3.
    // A and B are commuting Hermitian functions of U, so T commutes with U.
    Matrix t = Matrix::Zero(dim, dim);
    Matrix ap = Matrix::Identity(dim, dim);
    for (int p = 0; p <= 3; ++p) {
        Matrix apbq = ap;
        for (int q = 0; p + q <= 3; ++q) {
            t += rng.gaussian() * apbq;
            apbq = apbq * b;
        }
        ap = ap * a;
    }
    Matrix h1 = random_hermitian(dim, rng);
    Matrix h2 = t - h1;
    auto pair = std::make_pair(HermitianOp(h1), HermitianOp(h2));
    double c = commutator_norm(pair.first.matrix() + pair.second.matrix(), u.matrix());
    if (c > 1e-10)
        throw NumericalError("conserved_pair: commutator norm " + std::to_string(c));
    return pair;
}

double commutator_norm(const Matrix& a, const Matrix& b) {
    return (a * b - b * a).norm();
}

}  // namespace ttobs
