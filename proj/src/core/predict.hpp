#pragma once

#include "core/losses.hpp"
#include "core/models.hpp"

namespace strucgrad {

// Whole-dataset prediction; fans out across examples (slot-per-example, so
// results are independent of the thread count).
std::vector<std::vector<std::uint8_t>> mlc_predict_all(const MlcModel& model,
                                                       const ParamVector& theta,
                                                       const MlcDataset& ds);
std::vector<std::vector<int>> seq_predict_all(const SeqModel& model, const ParamVector& theta,
                                              const SeqDataset& ds);

}  // namespace strucgrad
