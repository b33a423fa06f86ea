#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hfl/common.hpp"

// Tokenizers. Byte mode is the workhorse (exact round trip by construction);
// char mode restricts to an observed alphabet; bpe adds greedy pair merges on
// top of the byte alphabet. The word-boundary rule used by the citation
// blocker lives here because it needs decoded token bytes.

namespace hfl {

enum class TokenizerMode { bytes, chars, bpe };

inline const char* to_string(TokenizerMode m) {
    switch (m) {
        case TokenizerMode::bytes: return "byte";
        case TokenizerMode::chars: return "char";
        case TokenizerMode::bpe: return "bpe";
    }
    return "?";
}

inline bool is_whitespace_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline bool is_punct_byte(unsigned char c) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
           (c >= 123 && c <= 126);
}

class Tokenizer {
public:
    TokenizerMode mode = TokenizerMode::bytes;

    static Tokenizer byte_tokenizer() {
        Tokenizer t;
        t.mode = TokenizerMode::bytes;
        t.vocab_.resize(256);
        for (int i = 0; i < 256; ++i) t.vocab_[size_t(i)] = std::string(1, char(i));
        return t;
    }

    // dense ids over the distinct bytes of a reference text, sorted by value
    static Tokenizer char_tokenizer(std::string_view reference) {
        require(!reference.empty(), "char tokenizer needs a non-empty reference text");
        std::array<bool, 256> seen{};
        for (unsigned char c : reference) seen[c] = true;
        Tokenizer t;
        t.mode = TokenizerMode::chars;
        t.byte_to_id_.fill(-1);
        for (int c = 0; c < 256; ++c) {
            if (!seen[size_t(c)]) continue;
            t.byte_to_id_[size_t(c)] = TokenId(t.vocab_.size());
            t.vocab_.push_back(std::string(1, char(c)));
        }
        return t;
    }

    // byte alphabet plus greedy most-frequent-pair merges
    static Tokenizer train_bpe(std::string_view corpus, int target_vocab) {
        require(target_vocab > 256, "bpe vocab must exceed the 256 byte alphabet");
        require(!corpus.empty(), "bpe training needs a non-empty corpus");
        Tokenizer t = byte_tokenizer();
        t.mode = TokenizerMode::bpe;
        std::vector<TokenId> ids(corpus.size());
        for (size_t i = 0; i < corpus.size(); ++i)
            ids[i] = TokenId(static_cast<unsigned char>(corpus[i]));
        while (int(t.vocab_.size()) < target_vocab) {
            std::map<std::pair<TokenId, TokenId>, int64_t> counts;
            for (size_t i = 0; i + 1 < ids.size(); ++i)
                ++counts[{ids[i], ids[i + 1]}];
            if (counts.empty()) break;
            auto best = counts.begin();
            for (auto it = counts.begin(); it != counts.end(); ++it)
                if (it->second > best->second) best = it;  // ties: lowest pair, map order
            if (best->second < 2) break;
            t.add_merge(best->first.first, best->first.second);
            ids = t.apply_merge(ids, best->first, TokenId(t.vocab_.size() - 1));
        }
        return t;
    }

    int vocab_size() const { return int(vocab_.size()); }
    const std::vector<std::pair<TokenId, TokenId>>& merges() const { return merges_; }

    std::vector<TokenId> encode(std::string_view text) const {
        std::vector<TokenId> out;
        out.reserve(text.size());
        switch (mode) {
            case TokenizerMode::bytes:
                for (unsigned char c : text) out.push_back(TokenId(c));
                break;
            case TokenizerMode::chars:
                for (size_t i = 0; i < text.size(); ++i) {
                    TokenId id = byte_to_id_[static_cast<unsigned char>(text[i])];
                    if (id < 0)
                        fail("char tokenizer: byte 0x" + byte_hex(text[i]) +
                             " at offset " + std::to_string(i) + " not in alphabet");
                    out.push_back(id);
                }
                break;
            case TokenizerMode::bpe: {
                for (unsigned char c : text) out.push_back(TokenId(c));
                for (size_t m = 0; m < merges_.size(); ++m)
                    out = apply_merge(out, merges_[m], TokenId(256 + m));
                break;
            }
        }
        return out;
    }

    std::string decode(std::span<const TokenId> ids) const {
        std::string out;
        for (TokenId id : ids) out += token_bytes(id);
        return out;
    }

    const std::string& token_bytes(TokenId id) const {
        require(id >= 0 && id < TokenId(vocab_.size()),
                "token id " + std::to_string(id) + " out of range");
        return vocab_[size_t(id)];
    }

    // a token begins a new word iff its bytes start with whitespace, or the
    // previous token's bytes end with whitespace/punctuation
    bool begins_word(TokenId tok, std::optional<TokenId> prev) const {
        const std::string& b = token_bytes(tok);
        if (!b.empty() && is_whitespace_byte(static_cast<unsigned char>(b.front()))) return true;
        if (!prev) return true;
        return ends_word(*prev);
    }

    // the current word is complete once the last emitted token ends in
    // whitespace or punctuation
    bool ends_word(TokenId tok) const {
        const std::string& b = token_bytes(tok);
        if (b.empty()) return true;
        unsigned char last = static_cast<unsigned char>(b.back());
        return is_whitespace_byte(last) || is_punct_byte(last);
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["mode"] = to_string(mode);
        j["vocab_size"] = vocab_size();
        if (mode == TokenizerMode::chars) {
            std::vector<int> alphabet;
            for (const auto& s : vocab_) alphabet.push_back(int(static_cast<unsigned char>(s[0])));
            j["alphabet"] = alphabet;
        }
        if (mode == TokenizerMode::bpe) {
            auto arr = nlohmann::ordered_json::array();
            for (auto [a, b] : merges_) arr.push_back({a, b});
            j["merges"] = arr;
        }
        return j;
    }

    static Tokenizer from_json(const nlohmann::json& j) {
        std::string mode = j.at("mode").get<std::string>();
        if (mode == "byte") return byte_tokenizer();
        if (mode == "char") {
            Tokenizer t;
            t.mode = TokenizerMode::chars;
            t.byte_to_id_.fill(-1);
            for (int c : j.at("alphabet")) {
                require(c >= 0 && c < 256, "tokenizer json: alphabet byte out of range");
                t.byte_to_id_[size_t(c)] = TokenId(t.vocab_.size());
                t.vocab_.push_back(std::string(1, char(c)));
            }
            require(int(t.vocab_.size()) == j.at("vocab_size").get<int>(),
                    "tokenizer json: vocab_size mismatch");
            return t;
        }
        if (mode == "bpe") {
            Tokenizer t = byte_tokenizer();
            t.mode = TokenizerMode::bpe;
            for (const auto& m : j.at("merges")) t.add_merge(m.at(0), m.at(1));
            require(int(t.vocab_.size()) == j.at("vocab_size").get<int>(),
                    "tokenizer json: vocab_size mismatch");
            return t;
        }
        fail("tokenizer json: unknown mode '" + mode + "'");
    }

private:
    std::vector<std::string> vocab_;                    // id -> decoded bytes
    std::vector<std::pair<TokenId, TokenId>> merges_;   // bpe only
    std::array<TokenId, 256> byte_to_id_{};             // char mode only

    void add_merge(TokenId a, TokenId b) {
        merges_.emplace_back(a, b);
        vocab_.push_back(token_bytes(a) + token_bytes(b));
    }

    static std::vector<TokenId> apply_merge(const std::vector<TokenId>& ids,
                                            std::pair<TokenId, TokenId> pair, TokenId merged) {
        std::vector<TokenId> out;
        out.reserve(ids.size());
        for (size_t i = 0; i < ids.size(); ++i) {
            if (i + 1 < ids.size() && ids[i] == pair.first && ids[i + 1] == pair.second) {
                out.push_back(merged);
                ++i;
            } else {
                out.push_back(ids[i]);
            }
        }
        return out;
    }

    static std::string byte_hex(char c) {
        static const char* digits = "0123456789abcdef";
        unsigned char u = static_cast<unsigned char>(c);
        return std::string{digits[u >> 4], digits[u & 0xf]};
    }
};

} // namespace hfl
