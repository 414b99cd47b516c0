#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace gffpin {

using SiteIndex = std::uint32_t;

/// Marker stored in a neighbor slot that points outside the box (height clamped to 0).
inline constexpr SiteIndex kBoundary = std::numeric_limits<SiteIndex>::max();

enum class Parity : std::uint8_t { even = 0, odd = 1 };

/// The box {0,...,n-1}^d with zero (Dirichlet) boundary.
///
/// Sites are numbered row-major with coordinate 0 running fastest. Every site
/// owns exactly 2d neighbor slots ordered (-e_0, +e_0, -e_1, +e_1, ...); a slot
/// leaving the box holds kBoundary. Immutable after construction.
class Box {
 public:
  Box(int d, int n);

  int dim() const { return d_; }
  int side() const { return n_; }
  std::size_t volume() const { return volume_; }
  int degree() const { return 2 * d_; }

  std::span<const SiteIndex> neighbors(SiteIndex site) const {
    return {neighbors_.data() + static_cast<std::size_t>(site) * degree(),
            static_cast<std::size_t>(degree())};
  }
  Parity parity(SiteIndex site) const { return static_cast<Parity>(parity_[site]); }

  /// Sites of one parity class, in increasing index order.
  std::span<const SiteIndex> sites_of(Parity p) const {
    return p == Parity::even ? std::span<const SiteIndex>(even_) : std::span<const SiteIndex>(odd_);
  }

  std::vector<int> decode(SiteIndex site) const;
  SiteIndex encode(std::span<const int> coords) const;

  /// Number of boundary slots of a site.
  int boundary_slots(SiteIndex site) const;

  /// The site whose every coordinate is n/2 (integer division).
  SiteIndex center() const;

  bool operator==(const Box& other) const { return d_ == other.d_ && n_ == other.n_; }

 private:
  int d_;
  int n_;
  std::size_t volume_;
  std::vector<SiteIndex> neighbors_;
  std::vector<std::uint8_t> parity_;
  std::vector<SiteIndex> even_;
  std::vector<SiteIndex> odd_;
};

inline Box build_box(int d, int n) { return Box(d, n); }

/// Maps the sites of `sub` (a box of smaller side) placed at `origin` inside `parent`
/// to parent site indices.
std::vector<SiteIndex> embed_sub_box(const Box& parent, const Box& sub, std::span<const int> origin);

}  // namespace gffpin
