#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dalr/io.hpp"
#include "support/random.hpp"

using namespace dalr;
using namespace dalr::testing;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir()
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() / (std::string("dalr_io_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

FormatErrorCode decode_code(const std::vector<std::uint8_t>& bytes, std::uint64_t* offset = nullptr)
{
    try {
        (void)io::decode_matrix(bytes);
    } catch (const FormatError& e) {
        if (offset)
            *offset = e.offset();
        return e.code();
    }
    ADD_FAILURE() << "decode succeeded";
    return FormatErrorCode::Io;
}

// Hand-assembled little-endian bytes, independent of the encoder.
std::vector<std::uint8_t> manual_f32_file(std::uint64_t rows, std::uint64_t cols, const std::vector<std::uint32_t>& bits)
{
    std::vector<std::uint8_t> b{'D', 'M', 'A', 'T', 1, 0, 0, 0, 0, 0, 0, 0};
    for (int i = 0; i < 8; ++i)
        b.push_back(static_cast<std::uint8_t>(rows >> (8 * i)));
    for (int i = 0; i < 8; ++i)
        b.push_back(static_cast<std::uint8_t>(cols >> (8 * i)));
    for (auto w : bits)
        for (int i = 0; i < 4; ++i)
            b.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
    return b;
}

} // namespace

TEST(MatrixFormat, HeaderLayout)
{
    const auto bytes = io::encode_matrix(DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}}));
    ASSERT_EQ(bytes.size(), 28u + 6 * 8);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DMAT");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[8], 1);
    EXPECT_EQ(bytes[12], 2);
    EXPECT_EQ(bytes[20], 3);
    // Row-major: the second element is 2.0 (0x4000000000000000).
    EXPECT_EQ(bytes[28 + 8 + 7], 0x40);
}

TEST(MatrixFormat, RoundTripF64IsExact)
{
    Rng rng(1);
    for (auto [r, c] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {3, 7}, {0, 4}, {5, 0}, {16, 2}}) {
        const DenseMatrix m = random_matrix(r, c, rng, 1e3);
        EXPECT_EQ(io::decode_matrix(io::encode_matrix(m)), m);
    }
}

TEST(MatrixFormat, F32ConstantsPromoteExactly)
{
    // 1.5, -2.25, 0.125, 1024
    const auto bytes = manual_f32_file(2, 2, {0x3FC00000u, 0xC0100000u, 0x3E000000u, 0x44800000u});
    EXPECT_EQ(io::decode_matrix(bytes), DenseMatrix::from_rows({{1.5, -2.25}, {0.125, 1024.0}}));
}

TEST(MatrixFormat, CorruptHeaders)
{
    auto good = io::encode_matrix(DenseMatrix::from_rows({{1, 2}}));
    std::uint64_t off = 99;

    auto magic = good;
    magic[0] = 'X';
    EXPECT_EQ(decode_code(magic, &off), FormatErrorCode::BadMagic);
    EXPECT_EQ(off, 0u);

    auto version = good;
    version[4] = 2;
    EXPECT_EQ(decode_code(version, &off), FormatErrorCode::BadVersion);
    EXPECT_EQ(off, 4u);

    auto dtype = good;
    dtype[8] = 7;
    EXPECT_EQ(decode_code(dtype, &off), FormatErrorCode::BadDtype);
    EXPECT_EQ(off, 8u);

    EXPECT_EQ(decode_code({good.begin(), good.begin() + 20}), FormatErrorCode::Truncated);
    EXPECT_EQ(decode_code({good.begin(), good.end() - 1}), FormatErrorCode::Truncated);

    auto trailing = good;
    trailing.push_back(0);
    EXPECT_EQ(decode_code(trailing, &off), FormatErrorCode::TrailingData);
    EXPECT_EQ(off, good.size());

    auto huge = good;
    huge[19] = 0xFF;
    EXPECT_EQ(decode_code(huge), FormatErrorCode::Truncated);
}

TEST(MatrixFormat, NonFiniteReportsElementOffset)
{
    auto bytes = manual_f32_file(1, 3, {0x3F800000u, 0x7FC00000u, 0x3F800000u});
    std::uint64_t off = 0;
    EXPECT_EQ(decode_code(bytes, &off), FormatErrorCode::NonFinite);
    EXPECT_EQ(off, 28u + 4);
    bytes = manual_f32_file(1, 1, {0x7F800000u});
    EXPECT_EQ(decode_code(bytes), FormatErrorCode::NonFinite);
}

TEST(MatrixFormat, FilesAndColumnBlocks)
{
    TempDir tmp;
    Rng rng(2);
    const DenseMatrix m = random_matrix(5, 23, rng);
    const auto path = tmp.path() / "m.dmat";
    io::write_matrix(path, m);
    EXPECT_EQ(io::read_matrix(path), m);

    io::ColumnBlockReader reader(path);
    EXPECT_EQ(reader.read_columns(4, 9), column_block(m, 4, 9));
    EXPECT_THROW(reader.read_columns(20, 24), RangeError);

    std::vector<DenseMatrix> blocks;
    EXPECT_EQ(io::for_each_column_block(path, 6, [&](const DenseMatrix& b) { blocks.push_back(b); }), 5u);
    ASSERT_EQ(blocks.size(), 4u);
    EXPECT_EQ(blocks.back().cols(), 5u);
    EXPECT_EQ(blocks[1], column_block(m, 6, 12));

    const auto f32 = tmp.path() / "f.dmat";
    io::write_matrix(f32, DenseMatrix::from_rows({{0.5, 3.0}}), io::Dtype::F32);
    EXPECT_EQ(io::ColumnBlockReader(f32).read_columns(0, 2), DenseMatrix::from_rows({{0.5, 3.0}}));

    try {
        io::read_matrix(tmp.path() / "missing.dmat");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.code(), FormatErrorCode::Io);
    }
}

TEST(Labels, RoundTripAndValidation)
{
    TempDir tmp;
    const std::vector<std::size_t> labels{0, 3, 1, 1, 7};
    io::write_labels(tmp.path() / "l.dmat", labels);
    EXPECT_EQ(io::read_labels(tmp.path() / "l.dmat"), labels);
    io::write_matrix(tmp.path() / "frac.dmat", DenseMatrix::from_rows({{0.5}}));
    EXPECT_THROW(io::read_labels(tmp.path() / "frac.dmat"), FormatError);
    io::write_matrix(tmp.path() / "neg.dmat", DenseMatrix::from_rows({{-1}}));
    EXPECT_THROW(io::read_labels(tmp.path() / "neg.dmat"), FormatError);
}

TEST(Manifest, RoundTripWithSplices)
{
    TempDir tmp;
    Rng rng(3);
    const Network net({random_layer(6, 5, rng), random_layer(3, 6, rng)}, {Activation::Relu, Activation::None});
    const Network spliced = splice(net, 0, svd_truncate(net.layer(0), 2));
    const auto path = tmp.path() / "out" / "network.json";
    io::save_network(spliced, path);
    EXPECT_TRUE(fs::exists(tmp.path() / "out" / "layer0.weights.dmat"));
    const Network back = io::load_network(path);
    ASSERT_EQ(back.size(), spliced.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back.layer(i).weights(), spliced.layer(i).weights());
        EXPECT_EQ(back.layer(i).bias(), spliced.layer(i).bias());
        EXPECT_EQ(back.activations()[i], spliced.activations()[i]);
    }
    ASSERT_EQ(back.splices().size(), 1u);
    EXPECT_EQ(back.splices()[0].rank, 2u);
    EXPECT_EQ(back.splices()[0].method, Method::Svd);
}

TEST(Manifest, MalformedManifestsAreFormatErrors)
{
    TempDir tmp;
    Rng rng(4);
    const Network net({random_layer(2, 3, rng)}, {Activation::None});
    const auto path = tmp.path() / "network.json";
    io::save_network(net, path);
    const std::string good = [&] {
        std::ifstream in(path);
        return std::string(std::istreambuf_iterator<char>(in), {});
    }();
    auto expect_code = [&](const std::string& text, FormatErrorCode code) {
        std::ofstream(path, std::ios::trunc) << text;
        try {
            (void)io::load_network(path);
            ADD_FAILURE() << "loaded: " << text;
        } catch (const FormatError& e) {
            EXPECT_EQ(e.code(), code) << text;
        }
    };
    expect_code("{not json", FormatErrorCode::Manifest);
    expect_code(R"({"format":"other","version":1,"layers":[]})", FormatErrorCode::Manifest);
    expect_code(R"({"format":"dalr-network","version":9,"layers":[]})", FormatErrorCode::Manifest);
    expect_code(R"({"format":"dalr-network","version":1})", FormatErrorCode::Manifest);
    std::string bad_act = good;
    bad_act.replace(bad_act.find("\"none\""), 6, "\"tanh\"");
    expect_code(bad_act, FormatErrorCode::Manifest);
    std::string missing = good;
    missing.replace(missing.find("layer0.weights"), 14, "nosuch.weights");
    expect_code(missing, FormatErrorCode::Io);
}
