#pragma once

#include "dctkd/tensor.hpp"

namespace dctkd {

enum class MapRole { teacher, student };

// H x W activation map produced by channel aggregation. Values are
// non-negative before normalization (means of squares) and lie in [0,1]
// afterwards.
struct ActivationMap {
  TensorPtr values;  // shape [H,W]
  int h = 0;
  int w = 0;
  bool normalized = false;
  int source_level = 0;
  MapRole source_role = MapRole::student;
};

// Channel aggregation: out(h,w) = mean_c features(c,h,w)^2. Output shape
// depends only on H x W, never on the channel count.
ActivationMap aggregate(Tape& tape, const TensorPtr& features, int level, MapRole role);

// Min-max rescale to [0,1]. A constant map becomes all zeros with zero
// gradient; otherwise gradient flows through the affine map and through the
// first row-major extremal elements.
ActivationMap minmax_normalize(Tape& tape, const ActivationMap& map);

}  // namespace dctkd
