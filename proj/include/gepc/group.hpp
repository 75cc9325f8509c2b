#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gepc/tensor.hpp"

namespace gepc {

/// Orthogonal operator P_g acting on fields by a signed index map.
///
/// Image elements (flips, rotations, circular shifts) are pure permutations
/// that never mix channels. Negate (x -> -x) and PlanarRot90 (the 2x2
/// rotation on width-2 fields) are test-only representations used by the
/// closed-form Gaussian checks; default_group never contains them.
struct GroupElement {
  enum class Kind { kIdentity, kFlipX, kFlipY, kRot90, kRot180, kShiftX, kShiftY, kNegate, kPlanarRot90 };

  Kind kind = Kind::kIdentity;
  // Pixel offset for shifts, power (1..3) for PlanarRot90.
  int param = 0;

  static GroupElement identity() { return {Kind::kIdentity, 0}; }
  static GroupElement flip_x() { return {Kind::kFlipX, 0}; }
  static GroupElement flip_y() { return {Kind::kFlipY, 0}; }
  static GroupElement rot90() { return {Kind::kRot90, 0}; }
  static GroupElement rot180() { return {Kind::kRot180, 0}; }
  static GroupElement shift_x(int k) { return {Kind::kShiftX, k}; }
  static GroupElement shift_y(int k) { return {Kind::kShiftY, k}; }
  static GroupElement negate() { return {Kind::kNegate, 0}; }
  static GroupElement planar_rot90(int power = 1) { return {Kind::kPlanarRot90, power}; }

  bool operator==(const GroupElement&) const = default;
};

std::string to_string(const GroupElement& g);
GroupElement parse_group_element(std::string_view token);

struct GroupSet {
  std::vector<GroupElement> elements;
  std::vector<std::string> warnings;

  std::size_t size() const { return elements.size(); }
};

/// Comma-separated config tokens, e.g. "id,flipx,flipy,rot90,rot180,shiftx:1,shifty:1".
GroupSet parse_group(std::string_view spec);
std::string to_string(const GroupSet& group);

/// {id, flipx, flipy, rot90, rot180, shiftx:1, shifty:1}; rot90 is dropped
/// with a recorded warning when H != W.
GroupSet default_group(int height, int width);

namespace detail {

inline int wrap(int v, int n) {
  const int r = v % n;
  return r < 0 ? r + n : r;
}

template <typename Scalar>
BasicField<Scalar> rot90_once(const BasicField<Scalar>& in) {
  const int h = in.height();
  const int w = in.width();
  if (h != w) {
    throw Error(ErrorCode::kNonSquareRotation,
                "rot90 requires a square field, got " + to_string(in.shape()));
  }
  BasicField<Scalar> out(in.shape());
  for (int c = 0; c < in.channels(); ++c)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) out(c, i, j) = in(c, j, w - 1 - i);
  return out;
}

template <typename Scalar>
BasicField<Scalar> planar_rot(const BasicField<Scalar>& in, int power) {
  if (in.width() != 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "planar rotation acts on width-2 fields, got " + to_string(in.shape()));
  }
  BasicField<Scalar> out = in;
  for (int p = 0; p < wrap(power, 4); ++p) {
    BasicField<Scalar> next(in.shape());
    for (int c = 0; c < in.channels(); ++c)
      for (int i = 0; i < in.height(); ++i) {
        next(c, i, 0) = -out(c, i, 1);
        next(c, i, 1) = out(c, i, 0);
      }
    out = std::move(next);
  }
  return out;
}

}  // namespace detail

/// out <- P_g in, using the fixed index maps (out <- in):
///   FlipX  out[c,i,j] = in[c,i,W-1-j]      FlipY  out[c,i,j] = in[c,H-1-i,j]
///   Rot90  out[c,i,j] = in[c,j,W-1-i]      Rot180 out[c,i,j] = in[c,H-1-i,W-1-j]
///   ShiftX out[c,i,j] = in[c,i,(j-k) mod W] ShiftY out[c,i,j] = in[c,(i-k) mod H,j]
template <typename Scalar>
BasicField<Scalar> apply(const GroupElement& g, const BasicField<Scalar>& in) {
  using K = GroupElement::Kind;
  const int h = in.height();
  const int w = in.width();
  BasicField<Scalar> out(in.shape());
  switch (g.kind) {
    case K::kIdentity:
      return in;
    case K::kNegate:
      out.array() = -in.array();
      return out;
    case K::kRot90:
      return detail::rot90_once(in);
    case K::kPlanarRot90:
      return detail::planar_rot(in, g.param);
    case K::kFlipX:
      for (int c = 0; c < in.channels(); ++c)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) out(c, i, j) = in(c, i, w - 1 - j);
      return out;
    case K::kFlipY:
      for (int c = 0; c < in.channels(); ++c)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) out(c, i, j) = in(c, h - 1 - i, j);
      return out;
    case K::kRot180:
      for (int c = 0; c < in.channels(); ++c)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) out(c, i, j) = in(c, h - 1 - i, w - 1 - j);
      return out;
    case K::kShiftX:
      for (int c = 0; c < in.channels(); ++c)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) out(c, i, j) = in(c, i, detail::wrap(j - g.param, w));
      return out;
    case K::kShiftY:
      for (int c = 0; c < in.channels(); ++c)
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) out(c, i, j) = in(c, detail::wrap(i - g.param, h), j);
      return out;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown group element");
}

/// out <- P_g^{-1} in. Rot90 is undone by three further Rot90 applications.
template <typename Scalar>
BasicField<Scalar> inverse_apply(const GroupElement& g, const BasicField<Scalar>& in) {
  using K = GroupElement::Kind;
  switch (g.kind) {
    case K::kRot90:
      return detail::rot90_once(detail::rot90_once(detail::rot90_once(in)));
    case K::kShiftX:
      return apply(GroupElement::shift_x(-g.param), in);
    case K::kShiftY:
      return apply(GroupElement::shift_y(-g.param), in);
    case K::kPlanarRot90:
      return detail::planar_rot(in, 4 - detail::wrap(g.param, 4));
    default:
      return apply(g, in);  // involutions
  }
}

/// Signed index map: out[n] = sign[n] * in[source[n]].
struct IndexMap {
  std::vector<std::ptrdiff_t> source;
  std::vector<signed char> sign;

  bool operator==(const IndexMap&) const = default;
};

IndexMap to_index_map(const GroupElement& g, const Shape& shape);
IndexMap identity_map(std::ptrdiff_t n);
/// (a o b)(x) = a(b(x)).
IndexMap compose(const IndexMap& a, const IndexMap& b);
Field apply(const IndexMap& map, const Field& in);

/// All elements of the group generated by `generators` on fields of `shape`,
/// starting with the identity, in breadth-first discovery order.
std::vector<IndexMap> generated_group(const GroupSet& generators, const Shape& shape);

}  // namespace gepc
