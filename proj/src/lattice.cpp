#include "gffpin/lattice.hpp"

#include <string>

#include "gffpin/error.hpp"

namespace gffpin {

namespace {

// Keeps per-site tables (2d neighbor slots of 4 bytes) well inside memory.
constexpr std::size_t kMaxVolume = std::size_t{1} << 30;

}  // namespace

Box::Box(int d, int n) : d_(d), n_(n), volume_(1) {
  if (d < 1) throw ConfigError("box dimension d must be >= 1, got " + std::to_string(d));
  if (n < 1) throw ConfigError("box side n must be >= 1, got " + std::to_string(n));
  for (int k = 0; k < d; ++k) {
    if (volume_ > kMaxVolume / static_cast<std::size_t>(n))
      throw ConfigError("box volume n^d overflows (d=" + std::to_string(d) + ", n=" + std::to_string(n) + ")");
    volume_ *= static_cast<std::size_t>(n);
  }

  const int deg = degree();
  neighbors_.assign(volume_ * deg, kBoundary);
  parity_.resize(volume_);

  std::vector<std::size_t> stride(d, 1);
  for (int k = 1; k < d; ++k) stride[k] = stride[k - 1] * n;

  std::vector<int> x(d, 0);
  for (std::size_t i = 0; i < volume_; ++i) {
    int sum = 0;
    for (int k = 0; k < d; ++k) {
      sum += x[k];
      SiteIndex* slot = neighbors_.data() + i * deg + 2 * k;
      if (x[k] > 0) slot[0] = static_cast<SiteIndex>(i - stride[k]);
      if (x[k] < n - 1) slot[1] = static_cast<SiteIndex>(i + stride[k]);
    }
    parity_[i] = static_cast<std::uint8_t>(sum & 1);
    (parity_[i] ? odd_ : even_).push_back(static_cast<SiteIndex>(i));

    for (int k = 0; k < d; ++k) {
      if (++x[k] < n) break;
      x[k] = 0;
    }
  }
}

std::vector<int> Box::decode(SiteIndex site) const {
  std::vector<int> x(d_);
  std::size_t r = site;
  for (int k = 0; k < d_; ++k) {
    x[k] = static_cast<int>(r % n_);
    r /= n_;
  }
  return x;
}

SiteIndex Box::encode(std::span<const int> coords) const {
  if (static_cast<int>(coords.size()) != d_) throw ConfigError("coordinate rank does not match box dimension");
  std::size_t i = 0;
  for (int k = d_ - 1; k >= 0; --k) {
    if (coords[k] < 0 || coords[k] >= n_) throw ConfigError("coordinate outside box");
    i = i * n_ + coords[k];
  }
  return static_cast<SiteIndex>(i);
}

int Box::boundary_slots(SiteIndex site) const {
  int count = 0;
  for (SiteIndex y : neighbors(site)) count += (y == kBoundary);
  return count;
}

SiteIndex Box::center() const {
  std::vector<int> c(d_, n_ / 2);
  return encode(c);
}

std::vector<SiteIndex> embed_sub_box(const Box& parent, const Box& sub, std::span<const int> origin) {
  if (sub.dim() != parent.dim()) throw ConfigError("sub-box dimension mismatch");
  std::vector<SiteIndex> map(sub.volume());
  std::vector<int> y(parent.dim());
  for (SiteIndex s = 0; s < sub.volume(); ++s) {
    auto x = sub.decode(s);
    for (int k = 0; k < parent.dim(); ++k) y[k] = origin[k] + x[k];
    map[s] = parent.encode(y);
  }
  return map;
}

}  // namespace gffpin
