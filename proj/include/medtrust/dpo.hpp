#pragma once

#include <array>
#include <vector>

#include "medtrust/error.hpp"

namespace medtrust {

/// Sequence log-probabilities (natural log) for one preference pair under
/// the policy and reference models. Computing them is a serving-stack
/// concern; this module only consumes them.
struct PairLogProbs {
    double logp_policy_chosen = 0.0;
    double logp_ref_chosen = 0.0;
    double logp_policy_rejected = 0.0;
    double logp_ref_rejected = 0.0;
};

struct DpoResult {
    double loss = 0.0;    // -ln sigmoid(margin), always >= 0
    double margin = 0.0;  // beta * ((policy-ref gap on chosen) - (gap on rejected))
    // Partials in field order of PairLogProbs:
    // d/d logp_policy_chosen, d/d logp_ref_chosen,
    // d/d logp_policy_rejected, d/d logp_ref_rejected.
    std::array<double, 4> grad{};
};

/// Pairwise preference loss over log-likelihood ratios, evaluated in a
/// numerically stable softplus form (finite for margins far beyond +-700).
/// Throws non_finite_input when any input or beta is not finite, and
/// config_error when beta <= 0.
DpoResult dpo_loss(const PairLogProbs& pair, double beta);

/// Mean per-pair loss. Throws empty_batch on an empty input.
double dpo_batch_loss(const std::vector<PairLogProbs>& pairs, double beta);

/// Central finite differences against the analytic partials; returns the
/// maximum relative error over the four inputs. Step h must be in (0, 1e-3].
double grad_check(const PairLogProbs& pair, double beta, double h);

}  // namespace medtrust
