#pragma once

#include <string>
#include <vector>

#include "hfl/rng.hpp"

// Seeded generator of English-like prose for fixtures: templated sentences
// over small word banks with a bias toward early bank entries, so the text
// has learnable structure without being trivially memorizable.

namespace hfl::testsupport {

class TextGen {
public:
    explicit TextGen(uint64_t seed) : rng_(derive_seed(seed, "textgen")) {}

    std::string paragraphs(size_t min_bytes) {
        std::string out;
        while (out.size() < min_bytes) {
            size_t n = 3 + rng_.below(5);
            for (size_t i = 0; i < n; ++i) out += sentence();
            out += "\n\n";
        }
        return out;
    }

    std::string sentence() {
        switch (rng_.below(7)) {
            case 0:
                return cap(the_np()) + " " + verb_past() + " " + prep() + " " + the_np() + ". ";
            case 1:
                return cap(name()) + " " + verb_past() + " that " + the_np() + " " +
                       verb_past() + " " + adverb() + ". ";
            case 2:
                return "The " + noun() + " " + verb_past() + " " + adverb() + ", and the " +
                       noun() + " " + verb_past() + " " + prep() + " the " + noun() + ". ";
            case 3:
                return cap(name()) + " saw " + art_np() + " near the " + place() + ". ";
            case 4:
                return "In the " + place() + ", " + the_np() + " " + verb_past() + " " +
                       adverb() + ". ";
            case 5:
                return "\"" + cap(verb_imp()) + " the " + noun() + ",\" said " + name() + ". ";
            default:
                return cap(the_np()) + " was " + adjective() + " and " + adjective() + ". ";
        }
    }

private:
    Rng rng_;

    // quadratic bias toward the front of each bank
    template <size_t N>
    const char* pick(const char* (&bank)[N]) {
        double u = rng_.next_double();
        size_t i = size_t(u * u * double(N));
        if (i >= N) i = N - 1;
        return bank[i];
    }

    std::string cap(std::string s) {
        if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = char(s[0] - 'a' + 'A');
        return s;
    }

    std::string noun() {
        static const char* bank[] = {
            "river",  "garden", "letter", "captain", "window",  "winter", "harbor",
            "lantern","meadow", "doctor", "bridge",  "forest",  "engine", "market",
            "island", "teacher","shadow", "painter", "village", "mirror", "orchard",
            "sailor", "museum", "anchor", "curtain", "valley",  "signal", "станция"};
        // the final entry exercises non-ascii bytes rarely
        return pick(bank);
    }

    std::string adjective() {
        static const char* bank[] = {"quiet", "bright", "narrow", "heavy",  "gentle",
                                     "pale",  "warm",   "crooked","silver", "distant",
                                     "calm",  "sudden", "hollow", "tired",  "golden"};
        return pick(bank);
    }

    std::string verb_past() {
        static const char* bank[] = {"waited",  "turned",  "opened",  "followed", "carried",
                                     "watched", "crossed", "reached", "remembered","answered",
                                     "gathered","lowered", "counted", "repaired",  "vanished"};
        return pick(bank);
    }

    std::string verb_imp() {
        static const char* bank[] = {"bring", "close", "find", "hold", "mind", "fetch"};
        return pick(bank);
    }

    std::string adverb() {
        static const char* bank[] = {"slowly",    "quietly", "again",    "at last", "carefully",
                                     "suddenly",  "alone",   "together", "early",   "without a word"};
        return pick(bank);
    }

    std::string prep() {
        static const char* bank[] = {"toward", "beyond", "beneath", "across", "behind", "inside"};
        return pick(bank);
    }

    std::string place() {
        static const char* bank[] = {"harbor",  "old town", "station", "north field",
                                     "library", "mill",     "square",  "lighthouse"};
        return pick(bank);
    }

    std::string name() {
        static const char* bank[] = {"Anna", "Peter", "Maria", "Ivan", "Clara",
                                     "Tomas","Elena", "Oskar", "Ruth", "Pavel"};
        return pick(bank);
    }

    std::string the_np() {
        if (rng_.below(3) == 0) return "the " + adjective() + " " + noun();
        return "the " + noun();
    }

    std::string art_np() {
        if (rng_.below(2) == 0) return "a " + adjective() + " " + noun();
        return "a " + noun();
    }
};

} // namespace hfl::testsupport
