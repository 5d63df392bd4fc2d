#pragma once

#include "dctkd/attention.hpp"
#include "dctkd/tensor.hpp"

namespace dctkd {

// H x W transform coefficients. When normalized, all non-DC coefficients lie
// in [0,1] and the DC slot is zero.
struct DctSpectrum {
  TensorPtr coeffs;  // shape [H,W]
  int h = 0;
  int w = 0;
  bool dc_removed = false;
  bool normalized = false;
};

// Orthonormal DCT-II basis matrix for size n (cached). Row u holds
// alpha(u) * cos(pi*(2x+1)*u / (2n)) with alpha(0)=sqrt(1/n), else sqrt(2/n).
const Tensor& dct_basis(int n);

// Orthonormal separable 2D DCT-II: S = D_h * X * D_w^T. Linear, so the
// backward rule is the transposed transform.
DctSpectrum dct2(Tape& tape, const ActivationMap& map);

// Exact inverse of dct2. Requires an untouched spectrum (no DC removal or
// normalization applied).
ActivationMap idct2(Tape& tape, const DctSpectrum& spec);

// Zeroes the DC coefficient; gradient w.r.t. the input DC slot is zero.
DctSpectrum remove_dc(Tape& tape, const DctSpectrum& spec);

// Min-max rescale of the non-DC coefficients to [0,1]; the DC slot stays 0
// and is excluded from the min/max. Degenerate spectra (max == min) map to
// all zeros with zero gradient.
DctSpectrum normalize_coeffs(Tape& tape, const DctSpectrum& spec);

}  // namespace dctkd
