#include "ttobs/protocols.hpp"

#include <algorithm>
#include <cmath>

namespace ttobs {

namespace {

constexpr double kEffectPsdTol = 1e-9;
constexpr double kCompletenessTol = 1e-8;
constexpr double kProbClampTol = 1e-12;
constexpr double kNormDriftTol = 1e-9;

// Cluster a sorted value sequence: a new cluster starts where the gap to the
// previous value is >= tol. Returns [start, stop) index ranges.
std::vector<std::pair<int, int>> cluster_sorted(const std::vector<double>& vals, double tol) {
    std::vector<std::pair<int, int>> out;
    int n = static_cast<int>(vals.size());
    int start = 0;
    for (int i = 1; i <= n; ++i) {
        if (i == n || vals[i] - vals[i - 1] >= tol) {
            out.push_back({start, i});
            start = i;
        }
    }
    return out;
}

}  // namespace

double default_bin_tol(const Matrix& op) {
    return 1e-8 * std::max(1.0, op.norm());
}

void validate_povm(const Povm& p) {
    if (p.atoms.empty()) throw PovmError("POVM with no atoms");
    Matrix sum = Matrix::Zero(p.dim, p.dim);
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& atom : p.atoms) {
        if (atom.effect.rows() != p.dim || atom.effect.cols() != p.dim)
            throw PovmError("POVM effect dimension mismatch");
        if (!(atom.value > prev)) throw PovmError("POVM atom values not strictly increasing");
        prev = atom.value;
        Matrix h = 0.5 * (atom.effect + Matrix(atom.effect.adjoint()));
        if (max_abs(atom.effect - h) > 1e-9) throw PovmError("POVM effect not Hermitian");
        Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -kEffectPsdTol)
            throw PovmError("POVM effect not positive semidefinite: min eigenvalue " +
                            std::to_string(es.eigenvalues().minCoeff()));
        sum += atom.effect;
    }
    sum.diagonal().array() -= 1.0;
    if (max_abs(sum) > kCompletenessTol)
        throw PovmError("POVM effects do not sum to identity: defect " +
                        std::to_string(max_abs(sum)));
}

double OutcomeDistribution::total() const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.second;
    return s;
}

OutcomeDistribution canonicalize(OutcomeDistribution d, double atom_tol) {
    std::sort(d.atoms.begin(), d.atoms.end());
    OutcomeDistribution out;
    size_t i = 0;
    while (i < d.atoms.size()) {
        double z = d.atoms[i].first;
        double zw = d.atoms[i].first * d.atoms[i].second;
        double p = d.atoms[i].second;
        size_t j = i + 1;
        while (j < d.atoms.size() && d.atoms[j].first - d.atoms[j - 1].first < atom_tol) {
            zw += d.atoms[j].first * d.atoms[j].second;
            p += d.atoms[j].second;
            ++j;
        }
        out.atoms.push_back({p > 0 ? zw / p : z, p});
        i = j;
    }
    return out;
}

OutcomeDistribution reflect(const OutcomeDistribution& d) {
    OutcomeDistribution out;
    out.atoms.reserve(d.atoms.size());
    for (auto it = d.atoms.rbegin(); it != d.atoms.rend(); ++it)
        out.atoms.push_back({-it->first, it->second});
    return out;
}

VariationObservable variation_observable(const HermitianOp& h1, const UnitaryOp& u,
                                         double bin_tol) {
    if (h1.dim() != u.dim())
        throw DimensionError("variation_observable: H1 dim " + std::to_string(h1.dim()) +
                             " != U dim " + std::to_string(u.dim()));
    Matrix delta = u.matrix().adjoint() * h1.matrix() * u.matrix() - h1.matrix();
    HermitianOp op(delta);
    if (bin_tol <= 0.0) bin_tol = default_bin_tol(op.matrix());

    VariationObservable out;
    out.op = op.matrix();
    out.bin_tol = bin_tol;
    out.eig = herm_eig(op);

    std::vector<double> vals(out.eig.values.data(), out.eig.values.data() + out.eig.values.size());
    for (const auto& [start, stop] : cluster_sorted(vals, bin_tol)) {
        VariationBin bin;
        bin.multiplicity = stop - start;
        double v = 0.0;
        Matrix proj = Matrix::Zero(h1.dim(), h1.dim());
        for (int i = start; i < stop; ++i) {
            v += vals[i];
            proj += out.eig.vectors.col(i) * out.eig.vectors.col(i).adjoint();
        }
        bin.value = v / bin.multiplicity;
        bin.projector = proj;
        out.bins.push_back(std::move(bin));
    }
    return out;
}

Povm obs_povm(const HermitianOp& h1, const UnitaryOp& u, double bin_tol) {
    VariationObservable vo = variation_observable(h1, u, bin_tol);
    Povm p;
    p.kind = PovmKind::Obs;
    p.dim = h1.dim();
    p.bin_tol = vo.bin_tol;
    for (const auto& bin : vo.bins) p.atoms.push_back({bin.value, bin.projector});
    validate_povm(p);
    return p;
}

Povm tpm_povm(const HermitianOp& h1, const UnitaryOp& u, double bin_tol) {
    if (h1.dim() != u.dim()) throw DimensionError("tpm_povm: dimension mismatch");
    if (bin_tol <= 0.0) bin_tol = default_bin_tol(h1.matrix());
    EigenSystem es = herm_eig(h1);
    const int n = h1.dim();

    // Eigenprojectors of H1, degeneracies resolved with bin_tol.
    std::vector<double> evals(es.values.data(), es.values.data() + n);
    std::vector<double> e;
    std::vector<Matrix> proj;
    for (const auto& [start, stop] : cluster_sorted(evals, bin_tol)) {
        double v = 0.0;
        Matrix pr = Matrix::Zero(n, n);
        for (int i = start; i < stop; ++i) {
            v += evals[i];
            pr += es.vectors.col(i) * es.vectors.col(i).adjoint();
        }
        e.push_back(v / (stop - start));
        proj.push_back(std::move(pr));
    }
    const int nb = static_cast<int>(e.size());

    struct Piece {
        double d;
        int j, k;
    };
    std::vector<Piece> pieces;
    for (int j = 0; j < nb; ++j)
        for (int k = 0; k < nb; ++k) pieces.push_back({e[j] - e[k], j, k});
    std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) {
        return a.d < b.d;
    });

    std::vector<double> dvals(pieces.size());
    for (size_t i = 0; i < pieces.size(); ++i) dvals[i] = pieces[i].d;

    Povm p;
    p.kind = PovmKind::Tpm;
    p.dim = n;
    p.bin_tol = bin_tol;
    for (const auto& [start, stop] : cluster_sorted(dvals, bin_tol)) {
        double v = 0.0;
        Matrix eff = Matrix::Zero(n, n);
        for (int i = start; i < stop; ++i) {
            const Piece& pc = pieces[i];
            v += pc.d;
            Matrix ujk = proj[pc.j] * u.matrix() * proj[pc.k];
            eff += ujk.adjoint() * ujk;  // P_k U^dag P_j U P_k
        }
        p.atoms.push_back({v / (stop - start), eff});
    }
    validate_povm(p);
    return p;
}

OutcomeDistribution evaluate(const Povm& p, const DensityState& rho) {
    if (p.dim != rho.dim()) throw DimensionError("evaluate: POVM and state dimension mismatch");
    OutcomeDistribution d;
    for (const auto& atom : p.atoms) {
        double prob = (atom.effect * rho.matrix()).trace().real();
        if (prob < -kProbClampTol)
            throw PovmError("evaluate: negative probability " + std::to_string(prob));
        d.atoms.push_back({atom.value, std::max(prob, 0.0)});
    }
    double drift = std::abs(d.total() - 1.0);
    if (drift >= kNormDriftTol)
        throw PovmError("evaluate: normalization drift " + std::to_string(drift));
    double s = d.total();
    for (auto& a : d.atoms) a.second /= s;
    return d;
}

CharacteristicSamples char_fn(const Povm& p, const DensityState& rho,
                              const std::vector<double>& grid) {
    OutcomeDistribution d = evaluate(p, rho);
    CharacteristicSamples out;
    out.grid = grid;
    out.values.reserve(grid.size());
    for (double u : grid) {
        Complex g = 0.0;
        for (const auto& [z, prob] : d.atoms) g += std::polar(prob, u * z);
        out.values.push_back(g);
    }
    return out;
}

std::pair<double, double> moments(const OutcomeDistribution& d) {
    double mean = 0.0, second = 0.0;
    for (const auto& [z, p] : d.atoms) {
        mean += z * p;
        second += z * z * p;
    }
    return {mean, second - mean * mean};
}

DistanceResult distribution_distance(const OutcomeDistribution& a, const OutcomeDistribution& b,
                                     double atom_tol) {
    if (atom_tol <= 0.0) throw PreconditionError("distribution_distance: atom_tol must be > 0");

    struct Event {
        double z;
        double pa, pb;
    };
    std::vector<Event> ev;
    for (const auto& [z, p] : a.atoms) ev.push_back({z, p, 0.0});
    for (const auto& [z, p] : b.atoms) ev.push_back({z, 0.0, p});
    std::sort(ev.begin(), ev.end(), [](const Event& x, const Event& y) { return x.z < y.z; });

    // TV over clusters merged within atom_tol.
    double tv = 0.0;
    size_t i = 0;
    while (i < ev.size()) {
        double pa = ev[i].pa, pb = ev[i].pb;
        size_t j = i + 1;
        while (j < ev.size() && ev[j].z - ev[j - 1].z < atom_tol) {
            pa += ev[j].pa;
            pb += ev[j].pb;
            ++j;
        }
        tv += std::abs(pa - pb);
        i = j;
    }
    tv *= 0.5;

    // 1-Wasserstein as the area between the raw CDFs.
    double w1 = 0.0, cdf = 0.0;
    for (size_t k = 0; k + 1 < ev.size(); ++k) {
        cdf += ev[k].pa - ev[k].pb;
        w1 += std::abs(cdf) * (ev[k + 1].z - ev[k].z);
    }
    return {tv, w1};
}

}  // namespace ttobs
