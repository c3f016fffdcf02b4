#include "sqforge/vocab.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <string>

namespace sqforge {

namespace vocab {

bool is_color(TokenId id) {
  return std::find(kColors.begin(), kColors.end(), id) != kColors.end();
}

bool is_category(TokenId id) {
  return std::find(kCategories.begin(), kCategories.end(), id) != kCategories.end();
}

Vec3 color_rgb(TokenId id) {
  switch (id) {
    case kWhite: return {0.8, 0.8, 0.8};
    case kRed: return {0.9, 0.1, 0.1};
    case kGreen: return {0.1, 0.8, 0.2};
    case kBlue: return {0.1, 0.2, 0.9};
    case kYellow: return {0.9, 0.85, 0.1};
    default: throw Error("token " + std::to_string(id) + " is not a color token");
  }
}

std::string_view name(TokenId id) {
  require(id >= 0 && id < kSize, "unknown token id " + std::to_string(id));
  return kEntries[static_cast<std::size_t>(id)].name;
}

TokenId parse(std::string_view text) {
  for (const auto& e : kEntries) {
    if (e.name == text) return e.id;
  }
  int v = -1;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec == std::errc() && ptr == text.data() + text.size() && v >= 0 && v < kSize) return v;
  throw Error("unknown label '" + std::string(text) + "'");
}

}  // namespace vocab
}  // namespace sqforge
