#include "gepc/group.hpp"

#include <deque>
#include <iostream>
#include <set>

#include "gepc/kvfile.hpp"

namespace gepc {

std::string to_string(const GroupElement& g) {
  using K = GroupElement::Kind;
  switch (g.kind) {
    case K::kIdentity: return "id";
    case K::kFlipX: return "flipx";
    case K::kFlipY: return "flipy";
    case K::kRot90: return "rot90";
    case K::kRot180: return "rot180";
    case K::kShiftX: return "shiftx:" + std::to_string(g.param);
    case K::kShiftY: return "shifty:" + std::to_string(g.param);
    case K::kNegate: return "negate";
    case K::kPlanarRot90: return "planar_rot90:" + std::to_string(g.param);
  }
  return "?";
}

GroupElement parse_group_element(std::string_view token) {
  const std::string t = trim(token);
  const auto colon = t.find(':');
  const std::string name = t.substr(0, colon);
  const bool has_arg = colon != std::string::npos;
  auto arg = [&]() {
    if (!has_arg) throw Error(ErrorCode::kConfig, "group element '" + t + "' needs an argument");
    return parse_int(t.substr(colon + 1));
  };
  if (name == "id" || name == "identity") return GroupElement::identity();
  if (name == "flipx") return GroupElement::flip_x();
  if (name == "flipy") return GroupElement::flip_y();
  if (name == "rot90") return GroupElement::rot90();
  if (name == "rot180") return GroupElement::rot180();
  if (name == "shiftx") return GroupElement::shift_x(arg());
  if (name == "shifty") return GroupElement::shift_y(arg());
  if (name == "negate") return GroupElement::negate();
  if (name == "planar_rot90") return GroupElement::planar_rot90(has_arg ? arg() : 1);
  throw Error(ErrorCode::kConfig, "unknown group element '" + t + "'");
}

GroupSet parse_group(std::string_view spec) {
  GroupSet out;
  for (const auto& tok : split(spec, ',')) {
    if (trim(tok).empty()) continue;
    out.elements.push_back(parse_group_element(tok));
  }
  if (out.elements.empty()) throw Error(ErrorCode::kConfig, "group must not be empty");
  return out;
}

std::string to_string(const GroupSet& group) {
  std::string s;
  for (std::size_t k = 0; k < group.elements.size(); ++k) {
    if (k) s += ',';
    s += to_string(group.elements[k]);
  }
  return s;
}

GroupSet default_group(int height, int width) {
  if (height < 2 || width < 2) {
    throw Error(ErrorCode::kInvalidArgument, "default group needs H, W >= 2");
  }
  GroupSet g;
  g.elements = {GroupElement::identity(), GroupElement::flip_x(), GroupElement::flip_y()};
  if (height == width) {
    g.elements.push_back(GroupElement::rot90());
  } else {
    g.warnings.push_back("rot90 dropped from the default group: field is " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  g.elements.push_back(GroupElement::rot180());
  g.elements.push_back(GroupElement::shift_x(1));
  g.elements.push_back(GroupElement::shift_y(1));
  return g;
}

IndexMap identity_map(std::ptrdiff_t n) {
  IndexMap m;
  m.source.resize(static_cast<std::size_t>(n));
  m.sign.assign(static_cast<std::size_t>(n), 1);
  for (std::ptrdiff_t k = 0; k < n; ++k) m.source[static_cast<std::size_t>(k)] = k;
  return m;
}

IndexMap to_index_map(const GroupElement& g, const Shape& shape) {
  // Push an index-coded field through the element: entry n carries n + 1, so
  // the output value's magnitude names the source and its sign the sign.
  Field probe(shape);
  for (std::ptrdiff_t n = 0; n < probe.size(); ++n) probe.array()[n] = static_cast<double>(n + 1);
  const Field moved = apply(g, probe);
  IndexMap m;
  m.source.resize(static_cast<std::size_t>(probe.size()));
  m.sign.resize(static_cast<std::size_t>(probe.size()));
  for (std::ptrdiff_t n = 0; n < probe.size(); ++n) {
    const double v = moved.array()[n];
    m.source[static_cast<std::size_t>(n)] = static_cast<std::ptrdiff_t>(std::abs(v)) - 1;
    m.sign[static_cast<std::size_t>(n)] = v < 0 ? -1 : 1;
  }
  return m;
}

IndexMap compose(const IndexMap& a, const IndexMap& b) {
  IndexMap out;
  out.source.resize(a.source.size());
  out.sign.resize(a.source.size());
  for (std::size_t n = 0; n < a.source.size(); ++n) {
    const auto mid = static_cast<std::size_t>(a.source[n]);
    out.source[n] = b.source[mid];
    out.sign[n] = static_cast<signed char>(a.sign[n] * b.sign[mid]);
  }
  return out;
}

Field apply(const IndexMap& map, const Field& in) {
  Field out(in.shape());
  for (std::size_t n = 0; n < map.source.size(); ++n) {
    out.array()[static_cast<Eigen::Index>(n)] =
        map.sign[n] * in.array()[static_cast<Eigen::Index>(map.source[n])];
  }
  return out;
}

std::vector<IndexMap> generated_group(const GroupSet& generators, const Shape& shape) {
  std::vector<IndexMap> gens;
  for (const auto& g : generators.elements) gens.push_back(to_index_map(g, shape));
  std::vector<IndexMap> found{identity_map(shape.size())};
  std::set<std::pair<std::vector<std::ptrdiff_t>, std::vector<signed char>>> seen;
  seen.insert({found[0].source, found[0].sign});
  std::deque<std::size_t> frontier{0};
  while (!frontier.empty()) {
    const IndexMap current = found[frontier.front()];
    frontier.pop_front();
    for (const auto& g : gens) {
      IndexMap next = compose(g, current);
      if (seen.insert({next.source, next.sign}).second) {
        found.push_back(std::move(next));
        frontier.push_back(found.size() - 1);
      }
    }
  }
  return found;
}

}  // namespace gepc
