#pragma once

// Independent reference implementations used only by tests. None of these
// share code paths with the library routines they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "mjlab/hand.hpp"

namespace oracle {

using Counts = std::array<int, mjlab::kNumKinds>;

inline Counts to_counts(const mjlab::TileCounts& c) {
    Counts out{};
    for (int k = 0; k < mjlab::kNumKinds; ++k) out[k] = c[k];
    return out;
}

// Exhaustive backtracking: every choice of pair, every triple and every run
// that can cover the lowest remaining tile.
inline bool all_sets(Counts& c, int sets_left) {
    int k = 0;
    while (k < mjlab::kNumKinds && c[k] == 0) ++k;
    if (k == mjlab::kNumKinds) return sets_left == 0;
    if (sets_left == 0) return false;
    if (c[k] >= 3) {
        c[k] -= 3;
        const bool ok = all_sets(c, sets_left - 1);
        c[k] += 3;
        if (ok) return true;
    }
    const int rank = k % mjlab::kNumRanks;
    if (rank <= 6 && c[k + 1] > 0 && c[k + 2] > 0) {
        --c[k], --c[k + 1], --c[k + 2];
        const bool ok = all_sets(c, sets_left - 1);
        ++c[k], ++c[k + 1], ++c[k + 2];
        if (ok) return true;
    }
    return false;
}

inline bool brute_force_winning(const mjlab::TileCounts& concealed, const std::vector<mjlab::Meld>& melds,
                                std::optional<mjlab::Suit> missing) {
    if (missing) {
        if (concealed.suit_total(*missing) > 0) return false;
        for (const auto& m : melds)
            if (m.tile.suit == *missing) return false;
    }
    Counts c = to_counts(concealed);
    const int sets = 4 - static_cast<int>(melds.size());
    for (int k = 0; k < mjlab::kNumKinds; ++k) {
        if (c[k] < 2) continue;
        c[k] -= 2;
        const bool ok = all_sets(c, sets);
        c[k] += 2;
        if (ok) return true;
    }
    return false;
}

// All winning concealed targets: one pair plus `sets` sets drawn from the
// allowed suits, respecting the four-copy cap after melds.
inline void for_each_winning_target(int sets, const std::vector<int>& suits, const Counts& cap,
                                    const std::function<void(const Counts&)>& fn) {
    std::vector<std::vector<int>> set_shapes;  // kinds covered by each set
    std::vector<int> kinds;
    for (int s : suits) {
        for (int r = 0; r < mjlab::kNumRanks; ++r) {
            const int k = s * mjlab::kNumRanks + r;
            kinds.push_back(k);
            set_shapes.push_back({k, k, k});
            if (r <= 6) set_shapes.push_back({k, k + 1, k + 2});
        }
    }
    Counts w{};
    std::function<void(int, int)> rec = [&](int start, int left) {
        for (int k = 0; k < mjlab::kNumKinds; ++k)
            if (w[k] > cap[k]) return;
        if (left == 0) {
            for (int p : kinds) {
                w[p] += 2;
                if (w[p] <= cap[p]) fn(w);
                w[p] -= 2;
            }
            return;
        }
        for (int i = start; i < static_cast<int>(set_shapes.size()); ++i) {
            for (int k : set_shapes[i]) ++w[k];
            rec(i, left - 1);
            for (int k : set_shapes[i]) --w[k];
        }
    };
    rec(0, sets);
}

// Minimum over all winning targets W of |W \ C|.
inline int enumerated_distance(const mjlab::Hand& hand) {
    std::vector<int> suits;
    for (int s = 0; s < mjlab::kNumSuits; ++s) {
        if (!hand.missing_suit || static_cast<int>(*hand.missing_suit) != s) suits.push_back(s);
    }
    Counts cap;
    cap.fill(4);
    for (const auto& m : hand.melds) cap[m.tile.index()] -= m.copies();
    const Counts held = to_counts(hand.concealed);
    int best = std::numeric_limits<int>::max();
    for_each_winning_target(4 - static_cast<int>(hand.melds.size()), suits, cap, [&](const Counts& w) {
        int missing = 0;
        for (int k = 0; k < mjlab::kNumKinds; ++k) missing += std::max(0, w[k] - held[k]);
        best = std::min(best, missing);
    });
    return best;
}

// Breadth-first search over single-tile replacements of a 14-tile hand,
// bounded by `max_depth`. Returns max_depth + 1 when no win is found.
inline int bfs_replacement_distance(const mjlab::Hand& hand, int max_depth) {
    std::set<Counts> frontier{to_counts(hand.concealed)};
    std::set<Counts> seen = frontier;
    Counts cap;
    cap.fill(4);
    for (const auto& m : hand.melds) cap[m.tile.index()] -= m.copies();
    auto wins = [&](const Counts& c) {
        mjlab::TileCounts tc;
        for (int k = 0; k < mjlab::kNumKinds; ++k) tc.add(mjlab::Tile::from_index(k), c[k]);
        return brute_force_winning(tc, hand.melds, hand.missing_suit);
    };
    for (int depth = 0; depth <= max_depth; ++depth) {
        for (const Counts& c : frontier)
            if (wins(c)) return depth;
        std::set<Counts> next;
        for (const Counts& c : frontier) {
            for (int out = 0; out < mjlab::kNumKinds; ++out) {
                if (c[out] == 0) continue;
                for (int in = 0; in < mjlab::kNumKinds; ++in) {
                    if (in == out || c[in] + 1 > cap[in]) continue;
                    Counts n = c;
                    --n[out];
                    ++n[in];
                    if (seen.insert(n).second) next.insert(n);
                }
            }
        }
        frontier = std::move(next);
    }
    return max_depth + 1;
}

// Three-sigma binomial band around p for n trials.
inline bool within_3sigma(double observed_rate, double p, long n) {
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    return std::abs(observed_rate - p) <= 3.0 * sigma + 1e-12;
}

// Probability that a grasp primitive ends unrecovered when every attempt fails
// with probability p, each retry first needs a re-localization that succeeds
// with probability rho, and a failed re-localization ends recovery.
inline double unrecovered_probability(double p, double rho, int retries) {
    double f = p;
    for (int k = 1; k <= retries; ++k) f = p * (1.0 - rho * (1.0 - f));
    return f;
}

// Trie statistics by direct enumeration over game prefixes. Each game is a
// token sequence plus whether the focal seat won.
struct PrefixStats {
    int visits = 0;
    int wins = 0;
};

struct EnumeratedPair {
    std::vector<std::string> prefix;
    std::string preferred;
    std::string dispreferred;
    double gap = 0.0;
    friend bool operator<(const EnumeratedPair& a, const EnumeratedPair& b) {
        return std::tie(a.prefix, a.preferred, a.dispreferred) < std::tie(b.prefix, b.preferred, b.dispreferred);
    }
};

inline std::map<std::vector<std::string>, PrefixStats> enumerate_prefixes(
    const std::vector<std::pair<std::vector<std::string>, bool>>& games) {
    std::map<std::vector<std::string>, PrefixStats> out;
    for (const auto& [tokens, win] : games) {
        for (std::size_t len = 0; len <= tokens.size(); ++len) {
            auto& st = out[std::vector<std::string>(tokens.begin(), tokens.begin() + static_cast<long>(len))];
            st.visits += 1;
            st.wins += win ? 1 : 0;
        }
    }
    return out;
}

inline std::set<EnumeratedPair> enumerate_pairs(const std::vector<std::pair<std::vector<std::string>, bool>>& games) {
    const auto stats = enumerate_prefixes(games);
    std::set<EnumeratedPair> out;
    for (const auto& [prefix, st] : stats) {
        std::set<std::string> next;
        for (const auto& [tokens, win] : games) {
            if (tokens.size() > prefix.size() && std::equal(prefix.begin(), prefix.end(), tokens.begin())) {
                next.insert(tokens[prefix.size()]);
            }
        }
        for (const auto& a : next) {
            for (const auto& b : next) {
                auto pa = prefix, pb = prefix;
                pa.push_back(a);
                pb.push_back(b);
                const double ra = static_cast<double>(stats.at(pa).wins) / stats.at(pa).visits;
                const double rb = static_cast<double>(stats.at(pb).wins) / stats.at(pb).visits;
                if (ra > rb) out.insert({prefix, a, b, ra - rb});
            }
        }
    }
    return out;
}

}  // namespace oracle
