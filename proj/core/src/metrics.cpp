#include "wsvc/metrics.hpp"

#include <cmath>

namespace wsvc {

double mse(const FrameBuffer& a, const FrameBuffer& b) {
  if (a.width != b.width || a.height != b.height)
    throw ContractError("psnr: frame dimensions differ");
  double acc = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

double psnr(const FrameBuffer& a, const FrameBuffer& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

}  // namespace wsvc
