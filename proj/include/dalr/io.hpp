#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dalr/network.hpp"

namespace dalr::io {

// Matrix file layout (all little-endian):
//   offset  0  magic "DMAT"
//   offset  4  u32 version = 1
//   offset  8  u32 dtype (0 = f32, 1 = f64)
//   offset 12  u64 rows
//   offset 20  u64 cols
//   offset 28  rows*cols scalars, row-major

inline constexpr std::array<char, 4> matrix_magic{'D', 'M', 'A', 'T'};
inline constexpr std::uint32_t matrix_version = 1;
inline constexpr std::size_t header_size = 28;

enum class Dtype : std::uint32_t { F32 = 0, F64 = 1 };

inline std::size_t dtype_size(Dtype d) { return d == Dtype::F32 ? 4 : 8; }

struct MatrixHeader {
    Dtype dtype = Dtype::F64;
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;

    std::uint64_t payload_bytes() const { return rows * cols * dtype_size(dtype); }
};

namespace detail {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value)
{
    for (std::size_t i = 0; i < sizeof(U); ++i)
        out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::uint8_t* p)
{
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

inline double decode_scalar(const std::uint8_t* p, Dtype dtype)
{
    if (dtype == Dtype::F64)
        return std::bit_cast<double>(get_le<std::uint64_t>(p));
    return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
}

} // namespace detail

inline std::vector<std::uint8_t> encode_header(const MatrixHeader& h)
{
    std::vector<std::uint8_t> out;
    out.reserve(header_size);
    out.insert(out.end(), matrix_magic.begin(), matrix_magic.end());
    detail::put_le<std::uint32_t>(out, matrix_version);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.dtype));
    detail::put_le<std::uint64_t>(out, h.rows);
    detail::put_le<std::uint64_t>(out, h.cols);
    return out;
}

/// Serializes `m`; F32 narrows every value.
inline std::vector<std::uint8_t> encode_matrix(const DenseMatrix& m, Dtype dtype = Dtype::F64)
{
    std::vector<std::uint8_t> out = encode_header(MatrixHeader{dtype, m.rows(), m.cols()});
    out.reserve(header_size + m.size() * dtype_size(dtype));
    for (double v : m.data()) {
        if (dtype == Dtype::F64)
            detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
        else
            detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

/// Validates the 28-byte header. `available` is the total byte count of the source.
inline MatrixHeader decode_header(std::span<const std::uint8_t> bytes, std::uint64_t available)
{
    if (bytes.size() < 4)
        throw FormatError(FormatErrorCode::Truncated, bytes.size(), "header shorter than magic");
    if (std::memcmp(bytes.data(), matrix_magic.data(), 4) != 0)
        throw FormatError(FormatErrorCode::BadMagic, 0, "expected magic \"DMAT\"");
    if (bytes.size() < header_size)
        throw FormatError(FormatErrorCode::Truncated, bytes.size(),
                          "header needs " + std::to_string(header_size) + " bytes");
    const auto version = detail::get_le<std::uint32_t>(bytes.data() + 4);
    if (version != matrix_version)
        throw FormatError(FormatErrorCode::BadVersion, 4, "unsupported version " + std::to_string(version));
    const auto dtype = detail::get_le<std::uint32_t>(bytes.data() + 8);
    if (dtype > 1)
        throw FormatError(FormatErrorCode::BadDtype, 8, "unknown dtype code " + std::to_string(dtype));
    MatrixHeader h{static_cast<Dtype>(dtype), detail::get_le<std::uint64_t>(bytes.data() + 12),
                   detail::get_le<std::uint64_t>(bytes.data() + 20)};
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / 8;
    if (h.cols != 0 && h.rows > limit / h.cols)
        throw FormatError(FormatErrorCode::Truncated, 12, "shape overflows the addressable payload");
    const std::uint64_t expected = header_size + h.payload_bytes();
    if (available < expected)
        throw FormatError(FormatErrorCode::Truncated, available,
                          "payload needs " + std::to_string(expected) + " bytes in total");
    if (available > expected)
        throw FormatError(FormatErrorCode::TrailingData, expected, "unexpected bytes after payload");
    return h;
}

inline DenseMatrix decode_matrix(std::span<const std::uint8_t> bytes)
{
    const MatrixHeader h = decode_header(bytes, bytes.size());
    DenseMatrix m(h.rows, h.cols);
    const std::size_t width = dtype_size(h.dtype);
    auto data = m.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t off = header_size + i * width;
        const double v = detail::decode_scalar(bytes.data() + off, h.dtype);
        if (!std::isfinite(v))
            throw FormatError(FormatErrorCode::NonFinite, off, "non-finite value at element " + std::to_string(i));
        data[i] = v;
    }
    return m;
}

inline void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw FormatError(FormatErrorCode::Io, 0, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw FormatError(FormatErrorCode::Io, 0, "failed writing " + path.string());
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError(FormatErrorCode::Io, 0, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_matrix(const std::filesystem::path& path, const DenseMatrix& m, Dtype dtype = Dtype::F64)
{
    write_bytes(path, encode_matrix(m, dtype));
}

inline DenseMatrix read_matrix(const std::filesystem::path& path) { return decode_matrix(read_bytes(path)); }

/// Reads a matrix file in blocks of whole columns without loading the payload at once.
class ColumnBlockReader {
public:
    explicit ColumnBlockReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary)
    {
        if (!in_)
            throw FormatError(FormatErrorCode::Io, 0, "cannot open " + path.string());
        std::error_code ec;
        const auto size = std::filesystem::file_size(path, ec);
        if (ec)
            throw FormatError(FormatErrorCode::Io, 0, "cannot stat " + path.string());
        std::array<std::uint8_t, header_size> buf{};
        in_.read(reinterpret_cast<char*>(buf.data()), header_size);
        header_ = decode_header(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(in_.gcount())),
                                size);
    }

    const MatrixHeader& header() const noexcept { return header_; }
    std::size_t rows() const noexcept { return header_.rows; }
    std::size_t cols() const noexcept { return header_.cols; }

    /// Columns [begin, end).
    DenseMatrix read_columns(std::size_t begin, std::size_t end)
    {
        if (begin > end || end > cols())
            throw RangeError("ColumnBlockReader: column range outside " + std::to_string(cols()) + " columns");
        const std::size_t width = dtype_size(header_.dtype);
        const std::size_t count = end - begin;
        DenseMatrix block(rows(), count);
        std::vector<std::uint8_t> buf(count * width);
        for (std::size_t i = 0; i < rows(); ++i) {
            const std::uint64_t off = header_size + (static_cast<std::uint64_t>(i) * cols() + begin) * width;
            in_.seekg(static_cast<std::streamoff>(off));
            in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
            if (static_cast<std::size_t>(in_.gcount()) != buf.size())
                throw FormatError(FormatErrorCode::Truncated, off, "short read in " + path_.string());
            for (std::size_t j = 0; j < count; ++j) {
                const double v = detail::decode_scalar(buf.data() + j * width, header_.dtype);
                if (!std::isfinite(v))
                    throw FormatError(FormatErrorCode::NonFinite, off + j * width,
                                      "non-finite value in " + path_.string());
                block(i, j) = v;
            }
        }
        return block;
    }

private:
    std::filesystem::path path_;
    std::ifstream in_;
    MatrixHeader header_;
};

inline constexpr std::size_t default_block_columns = 4096;

/// Calls `fn` on consecutive column blocks of at most `block_columns` columns. Returns the row count.
inline std::size_t for_each_column_block(const std::filesystem::path& path, std::size_t block_columns,
                                         const std::function<void(const DenseMatrix&)>& fn)
{
    if (block_columns == 0)
        throw UsageError("block size must be positive");
    ColumnBlockReader reader(path);
    for (std::size_t c = 0; c < reader.cols(); c += block_columns)
        fn(reader.read_columns(c, std::min(reader.cols(), c + block_columns)));
    return reader.rows();
}

/// Class labels stored as a 1×p (or p×1) matrix of non-negative integers.
inline std::vector<std::size_t> read_labels(const std::filesystem::path& path)
{
    const DenseMatrix m = read_matrix(path);
    if (m.rows() != 1 && m.cols() != 1)
        throw FormatError(FormatErrorCode::Manifest, 12, "label file must be a 1xp or px1 matrix, got " + m.shape());
    std::vector<std::size_t> labels;
    labels.reserve(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double v = m.data()[i];
        if (v < 0.0 || v != std::floor(v))
            throw FormatError(FormatErrorCode::Manifest, header_size + i * dtype_size(Dtype::F64),
                              "label " + std::to_string(v) + " is not a non-negative integer");
        labels.push_back(static_cast<std::size_t>(v));
    }
    return labels;
}

inline void write_labels(const std::filesystem::path& path, const std::vector<std::size_t>& labels)
{
    DenseMatrix m(1, labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        m(0, i) = static_cast<double>(labels[i]);
    write_matrix(path, m);
}

inline std::vector<double> read_vector(const std::filesystem::path& path)
{
    const DenseMatrix m = read_matrix(path);
    if (m.rows() != 1 && m.cols() != 1)
        throw FormatError(FormatErrorCode::Manifest, 12, "expected a vector (1xm), got " + m.shape());
    return {m.data().begin(), m.data().end()};
}

// ---------------------------------------------------------------------------
// Network manifest (JSON). Paths are relative to the manifest's directory.

inline constexpr const char* manifest_format = "dalr-network";
inline constexpr int manifest_version = 1;

namespace detail {

inline FormatError manifest_error(const std::string& what)
{
    return FormatError(FormatErrorCode::Manifest, 0, what);
}

} // namespace detail

inline nlohmann::ordered_json network_to_json(const Network& net, const std::string& stem = "layer")
{
    nlohmann::ordered_json doc;
    doc["format"] = manifest_format;
    doc["version"] = manifest_version;
    auto layers = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < net.size(); ++i) {
        nlohmann::ordered_json l;
        l["weights"] = stem + std::to_string(i) + ".weights.dmat";
        l["bias"] = stem + std::to_string(i) + ".bias.dmat";
        l["activation"] = to_string(net.activations()[i]);
        layers.push_back(std::move(l));
    }
    doc["layers"] = std::move(layers);
    auto splices = nlohmann::ordered_json::array();
    for (const auto& s : net.splices()) {
        nlohmann::ordered_json r;
        r["position"] = s.position;
        r["original_index"] = s.original_index;
        r["method"] = to_string(s.method);
        r["rank"] = s.rank;
        r["lambda"] = s.lambda;
        splices.push_back(std::move(r));
    }
    doc["splices"] = std::move(splices);
    return doc;
}

/// Writes the manifest and one weights/bias file pair per layer next to it.
inline void save_network(const Network& net, const std::filesystem::path& manifest_path)
{
    const auto dir = manifest_path.has_parent_path() ? manifest_path.parent_path() : std::filesystem::path(".");
    std::filesystem::create_directories(dir);
    const auto doc = network_to_json(net);
    for (std::size_t i = 0; i < net.size(); ++i) {
        const auto& layer = net.layer(i);
        write_matrix(dir / doc["layers"][i]["weights"].get<std::string>(), layer.weights());
        write_matrix(dir / doc["layers"][i]["bias"].get<std::string>(), DenseMatrix::row(layer.bias()));
    }
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out)
        throw FormatError(FormatErrorCode::Io, 0, "cannot open " + manifest_path.string() + " for writing");
    out << doc.dump(2) << '\n';
}

inline Network load_network(const std::filesystem::path& manifest_path)
{
    std::ifstream in(manifest_path);
    if (!in)
        throw FormatError(FormatErrorCode::Io, 0, "cannot open manifest " + manifest_path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(FormatErrorCode::Manifest, e.byte, std::string("manifest is not valid JSON: ") + e.what());
    }
    const auto dir = manifest_path.has_parent_path() ? manifest_path.parent_path() : std::filesystem::path(".");
    try {
        if (doc.at("format").get<std::string>() != manifest_format)
            throw detail::manifest_error("manifest format is not '" + std::string(manifest_format) + "'");
        if (doc.at("version").get<int>() != manifest_version)
            throw detail::manifest_error("unsupported manifest version");
        std::vector<LinearLayer> layers;
        std::vector<Activation> acts;
        for (const auto& l : doc.at("layers")) {
            DenseMatrix w = read_matrix(dir / l.at("weights").get<std::string>());
            std::vector<double> b = read_vector(dir / l.at("bias").get<std::string>());
            layers.emplace_back(std::move(w), std::move(b));
            acts.push_back(parse_activation(l.at("activation").get<std::string>()));
        }
        std::vector<SpliceRecord> splices;
        if (doc.contains("splices"))
            for (const auto& r : doc.at("splices"))
                splices.push_back(SpliceRecord{r.at("position").get<std::size_t>(),
                                               r.at("original_index").get<std::size_t>(),
                                               parse_method(r.at("method").get<std::string>()),
                                               r.at("rank").get<std::size_t>(), r.at("lambda").get<double>()});
        return Network(std::move(layers), std::move(acts), std::move(splices));
    } catch (const nlohmann::json::exception& e) {
        throw detail::manifest_error(std::string("malformed manifest: ") + e.what());
    } catch (const UsageError& e) {
        throw detail::manifest_error(e.what());
    } catch (const DimensionError& e) {
        throw detail::manifest_error(std::string("manifest layers do not chain: ") + e.what());
    } catch (const RangeError& e) {
        throw detail::manifest_error(e.what());
    }
}

} // namespace dalr::io
