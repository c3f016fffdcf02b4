#pragma once

#include "sqforge/common.hpp"

#include <array>
#include <span>
#include <string_view>

namespace sqforge::vocab {

// Token ids are part of the file formats; never renumber.
inline constexpr TokenId kNull = 0;
inline constexpr TokenId kChair = 1;
inline constexpr TokenId kTable = 2;
inline constexpr TokenId kRocket = 3;
inline constexpr TokenId kWhite = 4;
inline constexpr TokenId kRed = 5;
inline constexpr TokenId kGreen = 6;
inline constexpr TokenId kBlue = 7;
inline constexpr TokenId kYellow = 8;

inline constexpr int kSize = 9;

struct Entry {
  TokenId id;
  std::string_view name;
};

inline constexpr std::array<Entry, kSize> kEntries{{
    {kNull, "null"},
    {kChair, "chair"},
    {kTable, "table"},
    {kRocket, "rocket"},
    {kWhite, "white"},
    {kRed, "red"},
    {kGreen, "green"},
    {kBlue, "blue"},
    {kYellow, "yellow"},
}};

inline constexpr std::array<TokenId, 3> kCategories{kChair, kTable, kRocket};
inline constexpr std::array<TokenId, 5> kColors{kWhite, kRed, kGreen, kBlue, kYellow};

bool is_color(TokenId id);
bool is_category(TokenId id);

/// Target RGB of a color token, in [0,1].
Vec3 color_rgb(TokenId id);

std::string_view name(TokenId id);

/// Accepts a token name or a decimal id.
TokenId parse(std::string_view text);

}  // namespace sqforge::vocab
