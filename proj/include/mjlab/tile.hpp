#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mjlab {

enum class Suit : std::uint8_t { Characters = 0, Bamboo = 1, Dots = 2 };

inline constexpr int kNumSuits = 3;
inline constexpr int kNumRanks = 9;
inline constexpr int kNumKinds = kNumSuits * kNumRanks;  // 27 distinct tiles
inline constexpr int kCopiesPerKind = 4;
inline constexpr int kWallSize = kNumKinds * kCopiesPerKind;  // 108

inline constexpr std::array<Suit, kNumSuits> kAllSuits{Suit::Characters, Suit::Bamboo, Suit::Dots};

char suit_letter(Suit s);
std::string_view suit_name(Suit s);
std::optional<Suit> parse_suit(std::string_view text);

struct Tile {
    Suit suit = Suit::Characters;
    std::uint8_t rank = 1;  // 1..9

    constexpr Tile() = default;
    constexpr Tile(Suit s, int r) : suit(s), rank(static_cast<std::uint8_t>(r)) {}

    constexpr int index() const { return static_cast<int>(suit) * kNumRanks + (rank - 1); }
    static constexpr Tile from_index(int idx) {
        return Tile(static_cast<Suit>(idx / kNumRanks), idx % kNumRanks + 1);
    }
    constexpr bool valid() const { return rank >= 1 && rank <= kNumRanks && static_cast<int>(suit) < kNumSuits; }

    friend constexpr bool operator==(Tile a, Tile b) { return a.index() == b.index(); }
    friend constexpr bool operator<(Tile a, Tile b) { return a.index() < b.index(); }
};

// "5D", "1C", "9B"
std::string to_string(Tile t);
Tile parse_tile(std::string_view text);

// Multiset of tiles as per-kind counts.
class TileCounts {
public:
    TileCounts() { counts_.fill(0); }

    static TileCounts from_tiles(std::span<const Tile> tiles);
    // Space separated list, e.g. "1D 1D 2D 7B".
    static TileCounts parse(std::string_view text);
    static TileCounts full_set();

    int operator[](int kind) const { return counts_[kind]; }
    int count(Tile t) const { return counts_[t.index()]; }
    void add(Tile t, int n = 1);
    // Throws std::invalid_argument if fewer than n copies are held.
    void remove(Tile t, int n = 1);

    int total() const;
    int suit_total(Suit s) const;
    bool empty() const { return total() == 0; }
    std::vector<Tile> tiles() const;           // sorted, with repetition
    std::vector<Tile> distinct() const;        // sorted, unique

    TileCounts& operator+=(const TileCounts& o);
    friend TileCounts operator+(TileCounts a, const TileCounts& b) { return a += b; }
    friend bool operator==(const TileCounts&, const TileCounts&) = default;

    const std::array<std::uint8_t, kNumKinds>& raw() const { return counts_; }

private:
    std::array<std::uint8_t, kNumKinds> counts_;
};

std::string to_string(const TileCounts& c);

}  // namespace mjlab
