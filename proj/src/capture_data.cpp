#include "jsmix/capture_data.hpp"

#include <sstream>

namespace jsmix {

CaptureData make_capture_data(Grid2<uint8_t> observed, std::vector<std::string> ids) {
  const int d = observed.rows();
  const int T = observed.cols();
  if (d == 0 || T == 0) throw ValidationError("capture data is empty");
  if (!ids.empty() && static_cast<int>(ids.size()) != d) {
    throw ValidationError("id count does not match row count");
  }
  for (int i = 0; i < d; ++i) {
    bool any = false;
    for (int t = 0; t < T; ++t) {
      const uint8_t cell = observed(i, t);
      if (cell != 0 && cell != 1) {
        std::ostringstream msg;
        msg << "non-binary cell at row " << i + 1 << ", occasion " << t + 1 << ": "
            << static_cast<int>(cell);
        throw ValidationError(msg.str());
      }
      any = any || cell == 1;
    }
    if (!any) {
      std::ostringstream msg;
      msg << "observed row " << i + 1 << (ids.empty() ? "" : " (id " + ids[i] + ")")
          << " has no detections";
      throw ValidationError(msg.str());
    }
  }
  if (ids.empty()) {
    ids.reserve(d);
    for (int i = 0; i < d; ++i) ids.push_back("ind" + std::to_string(i + 1));
  }
  CaptureData data;
  data.y = std::move(observed);
  data.n_observed = d;
  data.ids = std::move(ids);
  return data;
}

CaptureData augment(const CaptureData& observed, int n_zero) {
  if (n_zero < 0) throw ValidationError("augmentation size must be non-negative");
  CaptureData out;
  out.n_observed = observed.n_observed;
  out.ids = observed.ids;
  out.y = Grid2<uint8_t>(observed.n_rows() + n_zero, observed.n_occasions(), 0);
  for (int i = 0; i < observed.n_rows(); ++i) {
    for (int t = 0; t < observed.n_occasions(); ++t) out.y(i, t) = observed.y(i, t);
  }
  return out;
}

}  // namespace jsmix
