#include "core/predict.hpp"

#include "core/util.hpp"

namespace strucgrad {

std::vector<std::vector<std::uint8_t>> mlc_predict_all(const MlcModel& model,
                                                       const ParamVector& theta,
                                                       const MlcDataset& ds) {
  std::vector<std::vector<std::uint8_t>> out(ds.items.size());
  parallel_for(ds.items.size(), [&](std::size_t i) {
    out[i] = threshold_labels(model.infer_forward(theta, ds.items[i]));
  });
  return out;
}

std::vector<std::vector<int>> seq_predict_all(const SeqModel& model, const ParamVector& theta,
                                              const SeqDataset& ds) {
  std::vector<std::vector<int>> out(ds.items.size());
  parallel_for(ds.items.size(), [&](std::size_t i) {
    Matrix probs = model.infer_forward(theta, ds.items[i]);
    std::vector<int> tags(probs.rows());
    for (std::size_t t = 0; t < probs.rows(); ++t) {
      auto row = probs.row(t);
      tags[t] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    out[i] = std::move(tags);
  });
  return out;
}

}  // namespace strucgrad
