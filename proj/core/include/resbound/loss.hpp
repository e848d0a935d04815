#pragma once

#include "resbound/image.hpp"
#include "resbound/model.hpp"

namespace resbound {

// exp(-MSE/theta) gate scale for the identity term.
inline constexpr double kIdentityGateTheta = 1e-3;

struct LossWeights {
  double restore = 1.0;
  double identity = 0.5;
  double edit = 0.1;
  double smooth = 0.05;
  double uncertainty = 0.1;

  void validate() const;  // throws DataError unless all >= 0
};

struct LossBreakdown {
  double restore = 0.0;      // mean |restored - clean|
  double identity = 0.0;     // gate(x_c ~ clean) * mean applied_edit^2
  double edit = 0.0;         // mean |applied_edit|
  double smooth = 0.0;       // mean forward-difference TV of the edit map
  double uncertainty = 0.0;  // mean exp(-u) * err^2 + u
  double total = 0.0;        // weighted sum
};

// All terms accumulated in 64-bit over the 32-bit maps. Throws NumericError
// when any term comes out non-finite.
LossBreakdown loss_total(const RestorationOutput& out, const Image& x_c,
                         const Image& y_clean, const LossWeights& w);

}  // namespace resbound
