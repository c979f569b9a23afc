#pragma once

#include <optional>
#include <vector>

#include "mjlab/tile.hpp"

namespace mjlab {

using Seat = int;
inline constexpr int kNumSeats = 4;

enum class MeldKind : std::uint8_t { Pung, ExposedKong, ConcealedKong };

struct Meld {
    MeldKind kind = MeldKind::Pung;
    Tile tile;
    std::optional<Seat> source_seat;  // absent for concealed or self-drawn kongs

    int copies() const { return kind == MeldKind::Pung ? 3 : 4; }
    bool is_kong() const { return kind != MeldKind::Pung; }
    friend bool operator==(const Meld&, const Meld&) = default;
};

struct Hand {
    TileCounts concealed;
    std::vector<Meld> melds;
    std::optional<Suit> missing_suit;

    // Concealed tiles plus three per meld; 13 between turns, 14 when the
    // holder must discard or can win.
    int set_equivalent_count() const { return concealed.total() + 3 * static_cast<int>(melds.size()); }
    // Copies of each kind owned by the hand, concealed and melded.
    TileCounts all_tiles() const;
    friend bool operator==(const Hand&, const Hand&) = default;
};

// True iff the hand holds no tile of `missing_suit` and the concealed tiles
// split into (4 - melds) sets plus one pair. Sets are identical triples or
// same-suit rank runs. Throws std::invalid_argument unless the configuration
// totals 14 set-equivalent tiles with at most four copies of any kind.
bool is_winning_hand(const TileCounts& concealed, const std::vector<Meld>& melds,
                     std::optional<Suit> missing_suit);

// Same test without the size precondition: false for malformed counts.
bool is_winning_shape(const TileCounts& concealed, const std::vector<Meld>& melds,
                      std::optional<Suit> missing_suit);

// Minimum number of tiles that must be exchanged (or, for a 13-tile hand,
// acquired) to reach a winning configuration with the current melds.
// Missing-suit tiles always count as tiles to exchange. A winning 14-tile
// hand scores 0; a 13-tile hand waiting on one tile scores 1.
int distance_to_win(const Hand& hand);
int distance_to_win(const TileCounts& concealed, const std::vector<Meld>& melds,
                    std::optional<Suit> missing_suit);

}  // namespace mjlab
