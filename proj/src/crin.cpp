#include "ttobs/crin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ttobs {

namespace {

// Pair up atoms of two POVMs by value within align_tol. Returns index pairs;
// unmatched indices are reported through the two leftover lists.
struct AtomAlignment {
    std::vector<std::pair<int, int>> matched;
    std::vector<int> only_a, only_b;
};

AtomAlignment align_atoms(const std::vector<PovmAtom>& a, const std::vector<PovmAtom>& b,
                          double align_tol) {
    AtomAlignment out;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        double d = a[i].value - b[j].value;
        if (std::abs(d) <= align_tol) {
            out.matched.push_back({static_cast<int>(i), static_cast<int>(j)});
            ++i;
            ++j;
        } else if (d < 0) {
            out.only_a.push_back(static_cast<int>(i++));
        } else {
            out.only_b.push_back(static_cast<int>(j++));
        }
    }
    for (; i < a.size(); ++i) out.only_a.push_back(static_cast<int>(i));
    for (; j < b.size(); ++j) out.only_b.push_back(static_cast<int>(j));
    return out;
}

CrinReport make_report(const std::string& condition, double worst, double tol,
                       std::string witness) {
    CrinReport r;
    r.condition = condition;
    r.worst_violation = worst;
    r.tol = tol;
    r.passed = worst <= tol;
    r.witness = std::move(witness);
    return r;
}

}  // namespace

PovmBuilder obs_builder(double bin_tol) {
    return [bin_tol](const HermitianOp& h1, const UnitaryOp& u) {
        return obs_povm(h1, u, bin_tol);
    };
}

PovmBuilder tpm_builder(double bin_tol) {
    return [bin_tol](const HermitianOp& h1, const UnitaryOp& u) {
        return tpm_povm(h1, u, bin_tol);
    };
}

DistributionProtocol as_distribution_protocol(PovmBuilder builder) {
    return [builder](const HermitianOp& h1, const UnitaryOp& u, const DensityState& rho) {
        return evaluate(builder(h1, u), rho);
    };
}

std::vector<DensityState> default_state_ensemble(int dim, int n_random, std::uint64_t seed) {
    std::vector<DensityState> states;
    for (int i = 0; i < dim; ++i) {
        Vector e = Vector::Zero(dim);
        e[i] = 1.0;
        states.push_back(DensityState::pure(e));
    }
    Rng rng(seed);
    for (int i = 0; i < n_random; ++i) states.push_back(DensityState::pure(random_pure_state(dim, rng)));
    states.push_back(DensityState(Matrix::Identity(dim, dim) / static_cast<double>(dim)));
    return states;
}

CrinReport check_conservation(const DistributionProtocol& protocol, const HermitianOp& h1,
                              const HermitianOp& h2, const UnitaryOp& u,
                              const std::vector<DensityState>& states, double tol,
                              double atom_tol) {
    double c = commutator_norm(h1.matrix() + h2.matrix(), u.matrix());
    if (c > 1e-10)
        throw PreconditionError("check_conservation: [H1+H2, U] norm " + std::to_string(c) +
                                " exceeds 1e-10; not a conserved pair");
    double worst = 0.0;
    std::string witness = "no states supplied";
    for (size_t s = 0; s < states.size(); ++s) {
        OutcomeDistribution d1 = protocol(h1, u, states[s]);
        OutcomeDistribution d2r = reflect(protocol(h2, u, states[s]));
        double tv = distribution_distance(d1, d2r, atom_tol).tv;
        if (tv >= worst) {
            worst = tv;
            witness = "state #" + std::to_string(s) + ", tv " + std::to_string(tv);
        }
    }
    return make_report("conservation", worst, tol, witness);
}

CrinReport check_reality(const DistributionProtocol& protocol, const HermitianOp& h1,
                         const UnitaryOp& u, double tol, double atom_tol) {
    // Joint eigenvectors of H1 and U^dag H1 U found by intersecting
    // eigenspaces: eigenvalue-1 vectors of P_a Q_b P_a.
    const double rank_tol = 1e-8;
    HermitianOp hb(u.matrix().adjoint() * h1.matrix() * u.matrix());
    EigenSystem ea = herm_eig(h1);
    EigenSystem eb = herm_eig(hb);
    const int n = h1.dim();
    double scale = std::max(1.0, h1.matrix().norm());

    auto eigprojectors = [n](const EigenSystem& es, double tol_) {
        std::vector<std::pair<double, Matrix>> out;
        int start = 0;
        for (int i = 1; i <= n; ++i) {
            if (i == n || es.values[i] - es.values[i - 1] >= tol_) {
                Matrix p = Matrix::Zero(n, n);
                double v = 0.0;
                for (int k = start; k < i; ++k) {
                    p += es.vectors.col(k) * es.vectors.col(k).adjoint();
                    v += es.values[k];
                }
                out.push_back({v / (i - start), std::move(p)});
                start = i;
            }
        }
        return out;
    };
    auto pa = eigprojectors(ea, 1e-9 * scale);
    auto pb = eigprojectors(eb, 1e-9 * scale);

    double worst = 0.0;
    int found = 0;
    std::string witness;
    for (const auto& [a_val, a_proj] : pa) {
        for (const auto& [b_val, b_proj] : pb) {
            Matrix m = a_proj * b_proj * a_proj;
            EigenSystem em = herm_eig(HermitianOp(m));
            for (int k = 0; k < n; ++k) {
                if (em.values[k] < 1.0 - rank_tol) continue;
                Vector v = em.vectors.col(k);
                ++found;
                OutcomeDistribution d = protocol(h1, u, DensityState::pure(v));
                double target = b_val - a_val;
                double hit = 0.0;
                for (const auto& [z, p] : d.atoms)
                    if (std::abs(z - target) <= atom_tol) hit += p;
                double tv = 1.0 - hit;
                if (tv >= worst) {
                    worst = tv;
                    witness = "joint eigenvector (e = " + std::to_string(a_val) +
                              ", eps = " + std::to_string(b_val) + "), tv " + std::to_string(tv);
                }
            }
        }
    }
    if (found == 0) return make_report("reality", 0.0, tol, "vacuous: no joint eigenvectors");
    return make_report("reality", worst, tol, witness + " [" + std::to_string(found) + " joint eigenvectors]");
}

CrinReport check_linearity(const DistributionProtocol& protocol, const HermitianOp& h1,
                           const UnitaryOp& u,
                           const std::vector<std::pair<DensityState, DensityState>>& pairs,
                           double tol, double atom_tol) {
    const double lambdas[] = {0.25, 0.5, 0.75};
    double worst = 0.0;
    std::string witness = "no pairs supplied";
    for (size_t s = 0; s < pairs.size(); ++s) {
        OutcomeDistribution da = protocol(h1, u, pairs[s].first);
        OutcomeDistribution db = protocol(h1, u, pairs[s].second);
        for (double lam : lambdas) {
            Matrix mix = lam * pairs[s].first.matrix() + (1.0 - lam) * pairs[s].second.matrix();
            OutcomeDistribution dm = protocol(h1, u, DensityState(mix));
            OutcomeDistribution combo;
            for (const auto& [z, p] : da.atoms) combo.atoms.push_back({z, lam * p});
            for (const auto& [z, p] : db.atoms) combo.atoms.push_back({z, (1.0 - lam) * p});
            combo = canonicalize(combo, atom_tol);
            double tv = distribution_distance(dm, combo, atom_tol).tv;
            if (tv >= worst) {
                worst = tv;
                witness = "pair #" + std::to_string(s) + ", lambda " + std::to_string(lam);
            }
        }
    }
    return make_report("linearity", worst, tol, witness);
}

CrinReport check_no_signaling(const PovmBuilder& builder, const HermitianOp& h1,
                              const UnitaryOp& u, const std::vector<UnitaryOp>& u_primes,
                              double tol) {
    Povm local = builder(h1, u);
    double worst = 0.0;
    std::string witness = "no U' supplied";
    for (size_t s = 0; s < u_primes.size(); ++s) {
        const UnitaryOp& up = u_primes[s];
        int dp = up.dim();
        Matrix idp = Matrix::Identity(dp, dp);
        HermitianOp h1_joint(tensor(h1.matrix(), idp));
        UnitaryOp u_joint(tensor(u.matrix(), up.matrix()));
        Povm joint = builder(h1_joint, u_joint);

        double align_tol = std::max(local.bin_tol, joint.bin_tol);
        AtomAlignment al = align_atoms(joint.atoms, local.atoms, std::max(align_tol, 1e-12));
        double dev = 0.0;
        for (const auto& [ji, li] : al.matched) {
            Matrix diff = joint.atoms[ji].effect - tensor(local.atoms[li].effect, idp);
            dev = std::max(dev, diff.norm());
        }
        bool mismatch = false;
        for (int ji : al.only_a)
            if (joint.atoms[ji].effect.norm() > align_tol) mismatch = true;
        for (int li : al.only_b)
            if (local.atoms[li].effect.norm() > align_tol) mismatch = true;
        if (mismatch) dev = std::max(dev, 1.0);
        if (dev >= worst) {
            worst = dev;
            witness = "U' #" + std::to_string(s) + (mismatch ? " (atom-set mismatch)" : "");
        }
    }
    return make_report("no-signaling", worst, tol, witness);
}

CrinReport check_operator_equality_lemma(const HermitianOp& h1, const HermitianOp& h2,
                                         const UnitaryOp& u, double tol) {
    double c = commutator_norm(h1.matrix() + h2.matrix(), u.matrix());
    if (c > 1e-10)
        throw PreconditionError("check_operator_equality_lemma: pair not conserved: " +
                                std::to_string(c));
    Povm m1 = obs_povm(h1, u);
    Povm m2 = obs_povm(h2, u);
    std::vector<PovmAtom> m2r(m2.atoms.rbegin(), m2.atoms.rend());
    for (auto& a : m2r) a.value = -a.value;

    double align_tol = std::max({m1.bin_tol, m2.bin_tol, 1e-9});
    AtomAlignment al = align_atoms(m1.atoms, m2r, align_tol);
    double worst = 0.0;
    std::string witness;
    for (const auto& [i, j] : al.matched) {
        double d = (m1.atoms[i].effect - m2r[j].effect).norm();
        if (d >= worst) {
            worst = d;
            witness = "atom z = " + std::to_string(m1.atoms[i].value);
        }
    }
    if (!al.only_a.empty() || !al.only_b.empty()) {
        worst = std::max(worst, 1.0);
        witness = "atom-set mismatch between M(z,H1,U) and M(-z,H2,U)";
    }
    return make_report("lemma", worst, tol, witness);
}

CrinReport pinning_diagnostic(const Povm& candidate, const HermitianOp& h1, const UnitaryOp& u,
                              double bin_tol) {
    validate_povm(candidate);
    VariationObservable vo = variation_observable(h1, u, bin_tol);
    double align = std::max({vo.bin_tol, candidate.bin_tol, 1e-12});
    const Matrix& v = vo.eig.vectors;
    const int n = h1.dim();

    double diag_score = 0.0, offdiag_score = 0.0;
    for (int i = 0; i < n; ++i) {
        double di = vo.eig.values[i];
        for (const auto& atom : candidate.atoms) {
            Complex mii = v.col(i).dot(atom.effect * v.col(i));
            double expected = (std::abs(atom.value - di) <= align) ? 1.0 : 0.0;
            diag_score += std::abs(mii.real() - expected) + std::abs(mii.imag());
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            for (const auto& atom : candidate.atoms) {
                Complex mij = v.col(i).dot(atom.effect * v.col(j));
                offdiag_score += std::norm(mij);
            }
        }
    double score = diag_score + offdiag_score;
    CrinReport r = make_report("pinning", score, 0.0, "diag " + std::to_string(diag_score) +
                                                          ", offdiag " + std::to_string(offdiag_score));
    r.passed = true;  // diagnostic, not a gate
    return r;
}

std::vector<DensityState> lemma_witness_states(const Povm& m_h1, const Povm& m_h2,
                                               double atom_tol) {
    const int n = m_h1.dim;
    std::vector<PovmAtom> m2r(m_h2.atoms.rbegin(), m_h2.atoms.rend());
    for (auto& a : m2r) a.value = -a.value;
    AtomAlignment al = align_atoms(m_h1.atoms, m2r, atom_tol);

    std::vector<DensityState> out;
    for (const auto& [i, j] : al.matched) {
        Matrix d = m_h1.atoms[i].effect - m2r[j].effect;
        int bj = 0, bk = 0;
        double best = 0.0;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                if (std::abs(d(r, c)) > best) {
                    best = std::abs(d(r, c));
                    bj = r;
                    bk = c;
                }
        if (best < 1e-12) continue;
        Vector psi = Vector::Zero(n);
        if (bj == bk) {
            psi[bj] = 1.0;
        } else {
            psi[bj] = 1.0;
            psi[bk] = std::conj(d(bj, bk));
        }
        out.push_back(DensityState::pure(psi));
    }
    // Unmatched atoms expose the violation on any state inside the effect's
    // support; use the dominant eigenvector.
    auto add_support_state = [&](const Matrix& eff) {
        EigenSystem es = herm_eig(HermitianOp(eff));
        if (es.values[n - 1] > 1e-10) out.push_back(DensityState::pure(es.vectors.col(n - 1)));
    };
    for (int i : al.only_a) add_support_state(m_h1.atoms[i].effect);
    for (int j : al.only_b) add_support_state(m2r[j].effect);
    return out;
}

}  // namespace ttobs
