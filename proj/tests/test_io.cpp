#include "doctest.h"

#include <cstring>
#include <filesystem>

#include "cornet/io.hpp"

using namespace cornet;

namespace {

std::filesystem::path scratch(const char* name) {
    auto p = std::filesystem::temp_directory_path() / "cornet_io_test";
    std::filesystem::create_directories(p);
    return p / name;
}

}  // namespace

TEST_CASE("tensor encoding has the documented header") {
    TensorData t{{2, 3}, {1, 2, 3, 4, 5, 6}};
    auto b = encode_tensor(t);
    REQUIRE(b.size() == 4 + 4 + 4 + 8 + 48);
    CHECK(std::string(b.begin(), b.begin() + 4) == "CORT");
    CHECK(b[4] == 1);
    CHECK(b[5] == 0);
    CHECK(b[6] == 0);
    CHECK(b[7] == 0);
    CHECK(b[8] == 2);
    CHECK(b[12] == 2);
    CHECK(b[16] == 3);
    auto back = decode_tensor(b);
    CHECK(back.shape == t.shape);
    CHECK(back.data == t.data);
    CHECK(encode_tensor(back) == b);
}

TEST_CASE("tensor files round-trip byte-exactly") {
    TensorData t{{2, 2, 3}, {}};
    for (int i = 0; i < 12; ++i) t.data.push_back(1.0 / (i + 1) - 0.3 * i);
    t.data[5] = -0.0;
    t.data[7] = 1e-310;
    auto path = scratch("t.cort");
    write_tensor(path, t);
    auto bytes = read_bytes(path);
    CHECK(bytes == encode_tensor(t));
    auto back = read_tensor(path);
    CHECK(back.shape == t.shape);
    CHECK(std::memcmp(back.data.data(), t.data.data(), 8 * t.data.size()) == 0);
    write_tensor(path, back);
    CHECK(read_bytes(path) == bytes);
}

TEST_CASE("zero-dimensional and empty tensors") {
    TensorData scalar{{}, {3.5}};
    CHECK(decode_tensor(encode_tensor(scalar)).data == scalar.data);
    TensorData empty{{0, 4}, {}};
    CHECK(decode_tensor(encode_tensor(empty)).shape == empty.shape);
}

TEST_CASE("corrupt tensors are rejected") {
    auto b = encode_tensor({{2}, {1, 2}});
    auto bad = b;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_tensor(bad), Error);
    bad = b;
    bad[4] = 2;
    CHECK_THROWS_AS(decode_tensor(bad), Error);
    bad = b;
    bad[5] = 1;
    CHECK_THROWS_AS(decode_tensor(bad), Error);
    bad = b;
    bad.pop_back();
    CHECK_THROWS_AS(decode_tensor(bad), Error);
    bad = b;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_tensor(bad), Error);
    CHECK_THROWS_AS(decode_tensor(std::vector<std::uint8_t>(b.begin(), b.begin() + 10)), Error);
    CHECK_THROWS_AS(encode_tensor({{3}, {1, 2}}), Error);
    try {
        decode_tensor(std::vector<std::uint8_t>{'C', 'O'});
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoError);
    }
}

TEST_CASE("labels round-trip and validate their length") {
    std::vector<std::uint32_t> l{0, 1, 2, 2, 1, 70000};
    auto b = encode_labels(l);
    CHECK(b.size() == 8 + 4 * l.size());
    CHECK(decode_labels(b) == l);
    auto path = scratch("l.corl");
    write_labels(path, l);
    CHECK(read_bytes(path) == b);
    CHECK(read_labels(path) == l);
    b.pop_back();
    CHECK_THROWS_AS(decode_labels(b), Error);
    CHECK_THROWS_AS(decode_labels(encode_tensor({{1}, {0}})), Error);
}

TEST_CASE("missing files are IoErrors") {
    try {
        read_tensor(scratch("does_not_exist.cort"));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoError);
    }
}

TEST_CASE("matrix conversion") {
    DenseMatrix m = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}});
    TensorData t = tensor_of(m);
    CHECK(t.shape == std::vector<std::uint32_t>{2, 3});
    CHECK(max_abs_diff(matrix_of(t), m) == 0.0);
    CHECK_THROWS_AS(matrix_of({{6}, {1, 2, 3, 4, 5, 6}}), Error);
}

TEST_CASE("key-value parsing") {
    auto kv = parse_key_values("# header\n a = 1 \nb=two words  # trailing\n\n\tc =\n");
    CHECK(kv.size() == 3);
    CHECK(kv["a"] == "1");
    CHECK(kv["b"] == "two words");
    CHECK(kv["c"].empty());
    CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), Error);
    CHECK_THROWS_AS(parse_key_values("just words\n"), Error);
    CHECK_THROWS_AS(parse_key_values(" = 3\n"), Error);
    try {
        parse_key_values("x\n");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
    }
}
