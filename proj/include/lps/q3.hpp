#pragma once

#include <cstdint>

#include "lps/ps_model.hpp"
#include "lps/sampler.hpp"

namespace lps {

// Yen's Q3 posterior predictive discrepancy over retained draws.
// For each draw: residual correlations per section pair on the observed data and
// on a replicate simulated from the draw; p-value is the fraction of draws where
// |Q3_rep| >= |Q3_obs|. Pairs with fewer than min_coworkers co-workers are skipped.
Q3Report q3_check(const PsModel& model, const PosteriorDraws& posterior, int n_rep,
                  int min_coworkers = 10, std::uint64_t seed = 1);

void write_q3_csv(const Q3Report& report, const PsData& data, const std::string& path);

}  // namespace lps
