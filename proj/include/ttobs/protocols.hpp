#ifndef TTOBS_PROTOCOLS_HPP
#define TTOBS_PROTOCOLS_HPP

#include <string>
#include <vector>

#include "ttobs/operators.hpp"

namespace ttobs {

// One spectral bin of the variation observable: eigenvalue, projector onto
// its eigenspace, multiplicity.
struct VariationBin {
    double value;
    Matrix projector;
    int multiplicity;
};

// Delta(H1, U) = U^dagger H1 U - H1 with its eigenvalues clustered into bins.
struct VariationObservable {
    Matrix op;
    std::vector<VariationBin> bins;
    double bin_tol;
    EigenSystem eig;  // underlying eigensystem (binned order = ascending)
};

enum class PovmKind { Obs, Tpm, Custom };

struct PovmAtom {
    double value;
    Matrix effect;
};

struct Povm {
    std::vector<PovmAtom> atoms;
    PovmKind kind = PovmKind::Custom;
    int dim = 0;
    double bin_tol = 0.0;
};

// Validates positivity (within -1e-9), completeness (within 1e-8) and
// strictly increasing atom values. Throws PovmError otherwise.
void validate_povm(const Povm& p);

struct OutcomeDistribution {
    // (value, probability) atoms, strictly increasing values.
    std::vector<std::pair<double, double>> atoms;
    double total() const;
};

// Sort and merge atoms closer than atom_tol; drop exact-zero atoms is NOT
// done (zero-probability atoms are kept only if present in the input).
OutcomeDistribution canonicalize(OutcomeDistribution d, double atom_tol);
OutcomeDistribution reflect(const OutcomeDistribution& d);  // z -> -z

struct CharacteristicSamples {
    std::vector<double> grid;
    std::vector<Complex> values;
};

double default_bin_tol(const Matrix& op);

VariationObservable variation_observable(const HermitianOp& h1, const UnitaryOp& u,
                                         double bin_tol = 0.0);

Povm obs_povm(const HermitianOp& h1, const UnitaryOp& u, double bin_tol = 0.0);

// TPM with Lueders first measurement. Degenerate H1 eigenspaces use the
// projector-resolved effects sum_{(j,k): e_j - e_k = d} P_k U^dag P_j U P_k.
Povm tpm_povm(const HermitianOp& h1, const UnitaryOp& u, double bin_tol = 0.0);

OutcomeDistribution evaluate(const Povm& p, const DensityState& rho);

CharacteristicSamples char_fn(const Povm& p, const DensityState& rho,
                              const std::vector<double>& grid);

std::pair<double, double> moments(const OutcomeDistribution& d);  // (mean, variance)

struct DistanceResult {
    double tv;
    double w1;
};

// Total variation after greedy atom matching within atom_tol, plus the
// 1-Wasserstein distance computed on the raw atom supports.
DistanceResult distribution_distance(const OutcomeDistribution& a, const OutcomeDistribution& b,
                                     double atom_tol);

}  // namespace ttobs

#endif
