#include "medtrust/dpo.hpp"

#include <cmath>

namespace medtrust {

namespace {

// softplus(x) = ln(1 + e^x) without overflow for large |x|.
double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

DpoResult dpo_loss(const PairLogProbs& pair, double beta) {
    if (!std::isfinite(pair.logp_policy_chosen) || !std::isfinite(pair.logp_ref_chosen) ||
        !std::isfinite(pair.logp_policy_rejected) || !std::isfinite(pair.logp_ref_rejected) ||
        !std::isfinite(beta)) {
        throw Error(ErrorCode::non_finite_input, "log-probabilities and beta must be finite");
    }
    if (beta <= 0.0) throw Error(ErrorCode::config_error, "beta must be positive");

    const double delta_chosen = pair.logp_policy_chosen - pair.logp_ref_chosen;
    const double delta_rejected = pair.logp_policy_rejected - pair.logp_ref_rejected;

    DpoResult result;
    result.margin = beta * (delta_chosen - delta_rejected);
    result.loss = softplus(-result.margin);

    // d loss / d margin = sigmoid(margin) - 1 = -sigmoid(-margin).
    const double dmargin = -sigmoid(-result.margin);
    result.grad = {
        dmargin * beta,    // logp_policy_chosen
        -dmargin * beta,   // logp_ref_chosen
        -dmargin * beta,   // logp_policy_rejected
        dmargin * beta,    // logp_ref_rejected
    };
    return result;
}

double dpo_batch_loss(const std::vector<PairLogProbs>& pairs, double beta) {
    if (pairs.empty()) throw Error(ErrorCode::empty_batch, "no preference pairs");
    double total = 0.0;
    for (const auto& pair : pairs) total += dpo_loss(pair, beta).loss;
    return total / static_cast<double>(pairs.size());
}

double grad_check(const PairLogProbs& pair, double beta, double h) {
    if (!(h > 0.0) || h > 1e-3) {
        throw Error(ErrorCode::config_error, "finite-difference step must be in (0, 1e-3]");
    }

    const DpoResult analytic = dpo_loss(pair, beta);

    auto loss_at = [&](int slot, double delta) {
        PairLogProbs p = pair;
        double* fields[4] = {&p.logp_policy_chosen, &p.logp_ref_chosen, &p.logp_policy_rejected,
                             &p.logp_ref_rejected};
        *fields[slot] += delta;
        return dpo_loss(p, beta).loss;
    };

    double max_rel_err = 0.0;
    for (int slot = 0; slot < 4; ++slot) {
        const double numeric = (loss_at(slot, h) - loss_at(slot, -h)) / (2.0 * h);
        const double denom = std::max(std::abs(analytic.grad[static_cast<size_t>(slot)]), 1e-12);
        const double rel =
            std::abs(numeric - analytic.grad[static_cast<size_t>(slot)]) / denom;
        max_rel_err = std::max(max_rel_err, rel);
    }
    return max_rel_err;
}

}  // namespace medtrust
