#pragma once

#include "wsvc/frame.hpp"

namespace wsvc {

// Peak signal-to-noise ratio against peak 1.0; identical frames report the
// 100 dB cap so downstream CSVs stay finite.
constexpr double kPsnrCap = 100.0;

double mse(const FrameBuffer& a, const FrameBuffer& b);
double psnr(const FrameBuffer& a, const FrameBuffer& b);

}  // namespace wsvc
