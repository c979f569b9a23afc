#include "mjlab/tile.hpp"

#include <sstream>
#include <stdexcept>

namespace mjlab {

char suit_letter(Suit s) {
    switch (s) {
        case Suit::Characters: return 'C';
        case Suit::Bamboo: return 'B';
        case Suit::Dots: return 'D';
    }
    return '?';
}

std::string_view suit_name(Suit s) {
    switch (s) {
        case Suit::Characters: return "Characters";
        case Suit::Bamboo: return "Bamboo";
        case Suit::Dots: return "Dots";
    }
    return "?";
}

std::optional<Suit> parse_suit(std::string_view text) {
    for (Suit s : kAllSuits) {
        if (text == suit_name(s) || (text.size() == 1 && text[0] == suit_letter(s))) return s;
    }
    return std::nullopt;
}

std::string to_string(Tile t) {
    std::string out;
    out += static_cast<char>('0' + t.rank);
    out += suit_letter(t.suit);
    return out;
}

Tile parse_tile(std::string_view text) {
    if (text.size() != 2 || text[0] < '1' || text[0] > '9') {
        throw std::invalid_argument("bad tile: " + std::string(text));
    }
    auto suit = parse_suit(text.substr(1, 1));
    if (!suit) throw std::invalid_argument("bad tile suit: " + std::string(text));
    return Tile(*suit, text[0] - '0');
}

TileCounts TileCounts::from_tiles(std::span<const Tile> tiles) {
    TileCounts c;
    for (Tile t : tiles) c.add(t);
    return c;
}

TileCounts TileCounts::parse(std::string_view text) {
    TileCounts c;
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) c.add(parse_tile(tok));
    return c;
}

TileCounts TileCounts::full_set() {
    TileCounts c;
    c.counts_.fill(kCopiesPerKind);
    return c;
}

void TileCounts::add(Tile t, int n) {
    counts_[t.index()] = static_cast<std::uint8_t>(counts_[t.index()] + n);
}

void TileCounts::remove(Tile t, int n) {
    if (counts_[t.index()] < n) {
        throw std::invalid_argument("remove: tile " + to_string(t) + " not held");
    }
    counts_[t.index()] = static_cast<std::uint8_t>(counts_[t.index()] - n);
}

int TileCounts::total() const {
    int n = 0;
    for (auto c : counts_) n += c;
    return n;
}

int TileCounts::suit_total(Suit s) const {
    int n = 0;
    const int base = static_cast<int>(s) * kNumRanks;
    for (int r = 0; r < kNumRanks; ++r) n += counts_[base + r];
    return n;
}

std::vector<Tile> TileCounts::tiles() const {
    std::vector<Tile> out;
    for (int k = 0; k < kNumKinds; ++k) {
        for (int i = 0; i < counts_[k]; ++i) out.push_back(Tile::from_index(k));
    }
    return out;
}

std::vector<Tile> TileCounts::distinct() const {
    std::vector<Tile> out;
    for (int k = 0; k < kNumKinds; ++k) {
        if (counts_[k] > 0) out.push_back(Tile::from_index(k));
    }
    return out;
}

TileCounts& TileCounts::operator+=(const TileCounts& o) {
    for (int k = 0; k < kNumKinds; ++k) counts_[k] = static_cast<std::uint8_t>(counts_[k] + o.counts_[k]);
    return *this;
}

std::string to_string(const TileCounts& c) {
    std::string out;
    for (Tile t : c.tiles()) {
        if (!out.empty()) out += ' ';
        out += to_string(t);
    }
    return out;
}

}  // namespace mjlab
