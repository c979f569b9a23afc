#include "mjlab/hand.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace mjlab {

TileCounts Hand::all_tiles() const {
    TileCounts all = concealed;
    for (const Meld& m : melds) all.add(m.tile, m.copies());
    return all;
}

namespace {

bool holds_suit(const TileCounts& concealed, const std::vector<Meld>& melds, Suit s) {
    if (concealed.suit_total(s) > 0) return true;
    return std::any_of(melds.begin(), melds.end(), [s](const Meld& m) { return m.tile.suit == s; });
}

// Whether one suit's ranks split entirely into triples and runs. Taking a
// triple whenever the lowest rank has three or more copies never loses a
// decomposition: three runs starting at the same rank are three triples.
bool suit_is_all_sets(std::array<int, kNumRanks> c) {
    for (int r = 0; r < kNumRanks; ++r) {
        if (c[r] >= 3) c[r] -= 3;
        if (c[r] == 0) continue;
        if (r + 2 >= kNumRanks) return false;
        const int n = c[r];
        if (c[r + 1] < n || c[r + 2] < n) return false;
        c[r] = 0;
        c[r + 1] -= n;
        c[r + 2] -= n;
    }
    return true;
}

std::array<int, kNumRanks> suit_slice(const TileCounts& c, int suit) {
    std::array<int, kNumRanks> out{};
    for (int r = 0; r < kNumRanks; ++r) out[r] = c[suit * kNumRanks + r];
    return out;
}

bool decomposes(const TileCounts& concealed) {
    // The pair lives in the one suit whose count is 2 mod 3; every other suit
    // must be a multiple of three.
    int pair_suit = -1;
    for (int s = 0; s < kNumSuits; ++s) {
        const int n = concealed.suit_total(static_cast<Suit>(s));
        if (n % 3 == 2) {
            if (pair_suit >= 0) return false;
            pair_suit = s;
        } else if (n % 3 == 1) {
            return false;
        }
    }
    if (pair_suit < 0) return false;
    for (int s = 0; s < kNumSuits; ++s) {
        if (s == pair_suit) continue;
        if (!suit_is_all_sets(suit_slice(concealed, s))) return false;
    }
    auto slice = suit_slice(concealed, pair_suit);
    for (int r = 0; r < kNumRanks; ++r) {
        if (slice[r] < 2) continue;
        slice[r] -= 2;
        if (suit_is_all_sets(slice)) return true;
        slice[r] += 2;
    }
    return false;
}

void validate_shape(const TileCounts& concealed, const std::vector<Meld>& melds) {
    if (melds.size() > 4) throw std::invalid_argument("hand has more than four melds");
    const int equiv = concealed.total() + 3 * static_cast<int>(melds.size());
    if (equiv != 14) {
        throw std::invalid_argument("winning test needs 14 set-equivalent tiles, got " + std::to_string(equiv));
    }
    TileCounts all = concealed;
    for (const Meld& m : melds) all.add(m.tile, m.copies());
    for (int k = 0; k < kNumKinds; ++k) {
        if (all[k] > kCopiesPerKind) {
            throw std::invalid_argument("more than four copies of " + to_string(Tile::from_index(k)));
        }
    }
}

// Best achievable overlap between one suit's held tiles and a target made of
// k sets and p pairs (p in {0,1}) inside that suit. -1 marks infeasible.
struct SuitTable {
    std::array<std::array<int, 2>, 5> best;
};

SuitTable compute_suit_table(const std::array<int, kNumRanks>& held, const std::array<int, kNumRanks>& cap) {
    // dp[a][b][k][p]: a = runs started one rank back, b = two ranks back.
    using Layer = std::array<std::array<std::array<std::array<int, 2>, 5>, 5>, 5>;
    auto fresh = [] {
        Layer l;
        for (auto& x : l)
            for (auto& y : x)
                for (auto& z : y) z.fill(-1);
        return l;
    };
    Layer cur = fresh();
    cur[0][0][0][0] = 0;
    for (int r = 0; r < kNumRanks; ++r) {
        Layer next = fresh();
        const int max_start = r <= kNumRanks - 3 ? 4 : 0;
        for (int a = 0; a <= 4; ++a) {
            for (int b = 0; b <= 4; ++b) {
                for (int k = 0; k <= 4; ++k) {
                    for (int p = 0; p <= 1; ++p) {
                        const int v = cur[a][b][k][p];
                        if (v < 0) continue;
                        for (int t = 0; t <= 1 && k + t <= 4; ++t) {
                            for (int pr = 0; pr + p <= 1; ++pr) {
                                for (int s = 0; s <= max_start && k + t + s <= 4; ++s) {
                                    const int want = 3 * t + 2 * pr + s + a + b;
                                    if (want > cap[r]) break;
                                    int& slot = next[s][a][k + t + s][p + pr];
                                    slot = std::max(slot, v + std::min(want, held[r]));
                                }
                            }
                        }
                    }
                }
            }
        }
        cur = next;
    }
    SuitTable table;
    for (int k = 0; k <= 4; ++k)
        for (int p = 0; p <= 1; ++p) table.best[k][p] = cur[0][0][k][p];
    return table;
}

const SuitTable& suit_table(const std::array<int, kNumRanks>& held, const std::array<int, kNumRanks>& cap) {
    thread_local std::unordered_map<std::uint64_t, SuitTable> cache;
    std::uint64_t key = 0;
    for (int r = 0; r < kNumRanks; ++r) {
        key = (key << 6) | (static_cast<std::uint64_t>(std::min(held[r], 7)) << 3) |
              static_cast<std::uint64_t>(cap[r]);
    }
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    if (cache.size() > (1u << 18)) cache.clear();
    return cache.emplace(key, compute_suit_table(held, cap)).first->second;
}

}  // namespace

bool is_winning_hand(const TileCounts& concealed, const std::vector<Meld>& melds, std::optional<Suit> missing_suit) {
    validate_shape(concealed, melds);
    if (missing_suit && holds_suit(concealed, melds, *missing_suit)) return false;
    return decomposes(concealed);
}

bool is_winning_shape(const TileCounts& concealed, const std::vector<Meld>& melds, std::optional<Suit> missing_suit) {
    try {
        return is_winning_hand(concealed, melds, missing_suit);
    } catch (const std::invalid_argument&) {
        return false;
    }
}

int distance_to_win(const Hand& hand) { return distance_to_win(hand.concealed, hand.melds, hand.missing_suit); }

int distance_to_win(const TileCounts& concealed, const std::vector<Meld>& melds, std::optional<Suit> missing_suit) {
    const int meld_count = std::min<int>(static_cast<int>(melds.size()), 4);
    const int sets_needed = 4 - meld_count;
    const int target_size = 14 - 3 * meld_count;

    std::array<int, kNumKinds> melded{};
    for (const Meld& m : melds) melded[m.tile.index()] += m.copies();

    // Knapsack over suits: acc[k][p] = best overlap using k sets and p pairs.
    std::array<std::array<int, 2>, 5> acc;
    for (auto& row : acc) row.fill(-1);
    acc[0][0] = 0;
    for (int s = 0; s < kNumSuits; ++s) {
        if (missing_suit && static_cast<int>(*missing_suit) == s) continue;
        std::array<int, kNumRanks> held{}, cap{};
        for (int r = 0; r < kNumRanks; ++r) {
            held[r] = std::min(concealed[s * kNumRanks + r], kCopiesPerKind);
            cap[r] = std::max(0, kCopiesPerKind - melded[s * kNumRanks + r]);
        }
        const SuitTable& table = suit_table(held, cap);
        std::array<std::array<int, 2>, 5> next;
        for (auto& row : next) row.fill(-1);
        for (int k = 0; k <= sets_needed; ++k) {
            for (int p = 0; p <= 1; ++p) {
                if (acc[k][p] < 0) continue;
                for (int dk = 0; k + dk <= sets_needed; ++dk) {
                    for (int dp = 0; p + dp <= 1; ++dp) {
                        const int v = table.best[dk][dp];
                        if (v < 0) continue;
                        next[k + dk][p + dp] = std::max(next[k + dk][p + dp], acc[k][p] + v);
                    }
                }
            }
        }
        acc = next;
    }
    const int overlap = acc[sets_needed][1];
    if (overlap < 0) throw std::logic_error("no winning target reachable");
    return target_size - overlap;
}

}  // namespace mjlab
