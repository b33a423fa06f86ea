#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hfl/io.hpp"
#include "hfl/tokenizer.hpp"

namespace fs = std::filesystem;

static fs::path temp_dir() {
    auto d = fs::temp_directory_path() / "hfl_io_test";
    fs::create_directories(d);
    return d;
}

TEST_CASE("little-endian scalar and array round trips") {
    std::stringstream ss;
    hfl::write_le(ss, int32_t(-123456));
    hfl::write_le(ss, uint64_t(0xdeadbeefcafef00dull));
    hfl::write_le(ss, 3.14159);
    float fs_[3] = {1.5f, -2.5f, 0.0f};
    hfl::write_le_array(ss, fs_, 3);

    CHECK(hfl::read_le<int32_t>(ss) == -123456);
    CHECK(hfl::read_le<uint64_t>(ss) == 0xdeadbeefcafef00dull);
    CHECK(hfl::read_le<double>(ss) == 3.14159);
    float back[3];
    hfl::read_le_array(ss, back, 3);
    CHECK(back[0] == 1.5f);
    CHECK(back[1] == -2.5f);
    CHECK(back[2] == 0.0f);
}

TEST_CASE("little-endian byte layout is fixed") {
    std::stringstream ss;
    hfl::write_le(ss, uint32_t(0x01020304));
    std::string bytes = ss.str();
    REQUIRE(bytes.size() == 4);
    CHECK(uint8_t(bytes[0]) == 0x04);
    CHECK(uint8_t(bytes[3]) == 0x01);
}

TEST_CASE("magic and length-prefixed strings") {
    std::stringstream ss;
    hfl::write_magic(ss, "HFTEST1");
    hfl::write_string(ss, "hello");
    hfl::expect_magic(ss, "HFTEST1", "test blob");
    CHECK(hfl::read_string(ss) == "hello");

    std::stringstream bad;
    hfl::write_magic(bad, "WRONG00");
    CHECK_THROWS_AS(hfl::expect_magic(bad, "HFTEST1", "test blob"), hfl::error);
}

TEST_CASE("file io creates parents and round trips") {
    auto p = temp_dir() / "nested" / "deep" / "file.bin";
    fs::remove_all(temp_dir() / "nested");
    std::string payload("binary\0data\xff", 12);
    hfl::write_file(p, payload);
    CHECK(hfl::read_file(p) == payload);
    CHECK_THROWS_AS(hfl::read_file(temp_dir() / "missing.bin"), hfl::error);
}

TEST_CASE("to_hex formats 64-bit values") {
    CHECK(hfl::to_hex(0) == "0000000000000000");
    CHECK(hfl::to_hex(0xdeadbeefull) == "00000000deadbeef");
}

TEST_CASE("byte tokenizer round-trips arbitrary bytes") {
    auto tok = hfl::Tokenizer::byte_tokenizer();
    CHECK(tok.vocab_size() == 256);
    std::string text;
    for (int i = 0; i < 256; ++i) text.push_back(char(i));
    auto ids = tok.encode(text);
    REQUIRE(ids.size() == 256);
    CHECK(tok.decode(ids) == text);
}

TEST_CASE("char tokenizer covers its reference and rejects strangers") {
    auto tok = hfl::Tokenizer::char_tokenizer("abcabc xyz");
    CHECK(tok.vocab_size() == 7);  // a b c space x y z
    auto ids = tok.encode("abc xyz");
    CHECK(tok.decode(ids) == "abc xyz");
    try {
        tok.encode("abq");
        FAIL("expected error for byte outside the reference");
    } catch (const hfl::error& e) {
        // the message names the byte offset
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}

TEST_CASE("bpe trains, compresses and round-trips") {
    std::string corpus;
    for (int i = 0; i < 200; ++i) corpus += "the cat sat on the mat. ";
    auto tok = hfl::Tokenizer::train_bpe(corpus, 300);
    CHECK(tok.vocab_size() <= 300);
    CHECK(tok.vocab_size() > 256);
    auto ids = tok.encode(corpus);
    CHECK(tok.decode(ids) == corpus);
    CHECK(ids.size() < corpus.size());  // merges actually compress

    // unseen text made of seen bytes still encodes
    auto novel = tok.encode("tac eht");
    CHECK(tok.decode(novel) == "tac eht");
}

TEST_CASE("tokenizer json round trip preserves encoding") {
    std::string corpus = "abra cadabra abra cadabra banana";
    auto tok = hfl::Tokenizer::train_bpe(corpus, 280);
    auto j = tok.to_json();
    auto back = hfl::Tokenizer::from_json(j);
    CHECK(back.vocab_size() == tok.vocab_size());
    CHECK(back.encode(corpus) == tok.encode(corpus));
    CHECK(back.decode(back.encode("banana")) == "banana");
}

TEST_CASE("word boundary predicates on byte tokens") {
    auto tok = hfl::Tokenizer::byte_tokenizer();
    auto id = [&](char c) { return tok.encode(std::string(1, c))[0]; };
    CHECK(tok.ends_word(id(' ')));
    CHECK(tok.ends_word(id('.')));
    CHECK(tok.ends_word(id(',')));
    CHECK(tok.ends_word(id('\n')));
    CHECK_FALSE(tok.ends_word(id('a')));
    CHECK_FALSE(tok.ends_word(id('Z')));
    CHECK(tok.begins_word(id('a'), id(' ')));
    CHECK_FALSE(tok.begins_word(id('b'), id('a')));
    CHECK(tok.begins_word(id('a'), std::nullopt));  // sequence start
}
