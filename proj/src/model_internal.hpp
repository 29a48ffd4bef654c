#pragma once

// Internal engine entry points shared between the model translation units.

#include "wordacq/models.hpp"

namespace wordacq {

TrainStepStats lstm_train_step(LMParameters& p, const TokenBatch& batch, Rng& rng);
Mat lstm_predict_logits(const LMParameters& p, const TokenBatch& batch,
                        const std::vector<PredictRequest>& requests);

TrainStepStats transformer_train_step_rows(LMParameters& p, const TokenBatch& batch,
                                           const std::vector<Eigen::Index>& head_rows,
                                           const std::vector<int32_t>& targets, Rng& rng);
Mat transformer_predict_logits(const LMParameters& p, const TokenBatch& batch,
                               const std::vector<PredictRequest>& requests);

}  // namespace wordacq
