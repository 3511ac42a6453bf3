#ifndef TTOBS_CRIN_HPP
#define TTOBS_CRIN_HPP

#include <functional>
#include <string>
#include <vector>

#include "ttobs/protocols.hpp"

namespace ttobs {

struct CrinReport {
    std::string condition;  // "conservation", "reality", "linearity", "no-signaling",
                            // "lemma", "pinning"
    bool passed = false;
    double worst_violation = 0.0;
    double tol = 0.0;
    std::string witness;
};

// A measurement protocol at the POVM level: state-independent by type.
using PovmBuilder = std::function<Povm(const HermitianOp&, const UnitaryOp&)>;

// A protocol at the distribution level. State-adaptive (non-POVM) protocols
// fit this signature too, which is what the linearity checker probes.
using DistributionProtocol =
    std::function<OutcomeDistribution(const HermitianOp&, const UnitaryOp&, const DensityState&)>;

PovmBuilder obs_builder(double bin_tol = 0.0);
PovmBuilder tpm_builder(double bin_tol = 0.0);
DistributionProtocol as_distribution_protocol(PovmBuilder builder);

// Default probe ensemble: computational basis states, Haar-random pure
// states, and the maximally mixed state.
std::vector<DensityState> default_state_ensemble(int dim, int n_random, std::uint64_t seed);

CrinReport check_conservation(const DistributionProtocol& protocol, const HermitianOp& h1,
                              const HermitianOp& h2, const UnitaryOp& u,
                              const std::vector<DensityState>& states, double tol,
                              double atom_tol);

CrinReport check_reality(const DistributionProtocol& protocol, const HermitianOp& h1,
                         const UnitaryOp& u, double tol, double atom_tol);

CrinReport check_linearity(const DistributionProtocol& protocol, const HermitianOp& h1,
                           const UnitaryOp& u,
                           const std::vector<std::pair<DensityState, DensityState>>& pairs,
                           double tol, double atom_tol);

CrinReport check_no_signaling(const PovmBuilder& builder, const HermitianOp& h1,
                              const UnitaryOp& u, const std::vector<UnitaryOp>& u_primes,
                              double tol);

// OBS-specific: M(z, H1, U) = M(-z, H2, U) atom by atom for a conserved pair.
CrinReport check_operator_equality_lemma(const HermitianOp& h1, const HermitianOp& h2,
                                         const UnitaryOp& u, double tol);

// Deviation-from-OBS score built from the Result-1 diagonal pinning: zero
// iff the candidate coincides with OBS on the binned support.
CrinReport pinning_diagnostic(const Povm& candidate, const HermitianOp& h1, const UnitaryOp& u,
                              double bin_tol = 0.0);

// Adversarial probe states from the conditions-1&3 lemma proof: for the
// worst mismatched matrix element Phi = <j|Ma(z)|k> - <j|Mb(-z)|k>, the
// state (|j> + Phi^* |k>)/norm exposes the conservation violation.
std::vector<DensityState> lemma_witness_states(const Povm& m_h1, const Povm& m_h2,
                                               double atom_tol);

}  // namespace ttobs

#endif
