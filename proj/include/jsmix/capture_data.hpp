#pragma once

#include <string>
#include <vector>

#include "jsmix/common.hpp"

namespace jsmix {

// Detection matrix with the first n_observed rows holding real capture
// histories and the remainder all-zero pseudo-individual rows.
struct CaptureData {
  Grid2<uint8_t> y;              // M x T
  int n_observed = 0;            // D
  std::vector<std::string> ids;  // length D, row identifiers from the input file

  int n_rows() const { return y.rows(); }       // M
  int n_occasions() const { return y.cols(); }  // T
};

// Validates the observed block: every row must have at least one detection.
CaptureData make_capture_data(Grid2<uint8_t> observed, std::vector<std::string> ids = {});

// Appends n_zero all-zero rows; the observed block is left untouched.
CaptureData augment(const CaptureData& observed, int n_zero);

}  // namespace jsmix
