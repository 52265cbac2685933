#pragma once

#include "art/core_model.hpp"

namespace art {

// Most-reported state per event, ties to the lowest state; the confidence
// rows are the vote proportions.
inline TruthEstimate majority_vote(const ObservationMatrix& obs) { return TruthEstimate::from_confidence(mv_prior(obs)); }

}  // namespace art
