#pragma once

/// Binary file formats for dense tensors ("DTNS") and Tucker models
/// ("DTKR").  Both formats are little-endian regardless of host byte
/// order, versioned, and roundtrip bit-exactly.  Malformed files are
/// rejected with a FileFormatError carrying a distinct code per failure
/// class so callers can map them to diagnostics.

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tuckit/decompose.hpp"
#include "tuckit/preprocess.hpp"
#include "tuckit/tensor.hpp"

namespace tuckit {

/// Why a file could not be read or written.
enum class FileErrorCode {
    /// The file does not start with the expected magic bytes.
    bad_magic,
    /// The file ends before the declared content does.
    truncated,
    /// The format version is not one this reader understands.
    version_mismatch,
    /// The content is structurally inconsistent (zero extents, size
    /// overflow, trailing bytes, ranks exceeding dims, ...).
    malformed,
    /// The underlying stream could not be opened, read, or written.
    io_failure,
};

inline const char* to_string(FileErrorCode code) {
    switch (code) {
        case FileErrorCode::bad_magic: return "bad magic";
        case FileErrorCode::truncated: return "truncated file";
        case FileErrorCode::version_mismatch: return "version mismatch";
        case FileErrorCode::malformed: return "malformed content";
        case FileErrorCode::io_failure: return "io failure";
    }
    return "unknown";
}

/// Error thrown by every reader/writer in this header.
class FileFormatError : public std::runtime_error {
public:
    FileFormatError(FileErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] FileErrorCode code() const { return code_; }

private:
    FileErrorCode code_;
};

/// Current version written by (and the only version accepted by) the
/// tensor and model codecs.
inline constexpr std::uint32_t kFileFormatVersion = 1;

/// A Tucker model as stored on disk: the decomposition itself plus the
/// optional centering/scaling record needed to map reconstructions back
/// to physical units.
struct StoredModel {
    TuckerModel model;
    std::optional<ScalingRecord> scaling;
};

namespace detail {

inline constexpr std::array<char, 4> kTensorMagic{'D', 'T', 'N', 'S'};
inline constexpr std::array<char, 4> kModelMagic{'D', 'T', 'K', 'R'};

/// Append-only little-endian encoder.
class ByteWriter {
public:
    void magic(const std::array<char, 4>& m) {
        for (const char c : m) bytes_.push_back(static_cast<unsigned char>(c));
    }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }

    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }

    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void u8(std::uint8_t v) { bytes_.push_back(v); }

    void f64_span(std::span<const double> values) {
        for (const double v : values) f64(v);
    }

    [[nodiscard]] const std::vector<unsigned char>& bytes() const { return bytes_; }

private:
    std::vector<unsigned char> bytes_;
};

/// Cursor over a fully buffered file with truncation-checked reads.
class ByteReader {
public:
    explicit ByteReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    void expect_magic(const std::array<char, 4>& want) {
        require(4, "magic");
        for (std::size_t i = 0; i < 4; ++i) {
            if (static_cast<char>(bytes_[pos_ + i]) != want[i]) {
                throw FileFormatError(FileErrorCode::bad_magic,
                                      "bad magic: not a recognized file of this type");
            }
        }
        pos_ += 4;
    }

    std::uint32_t u32(const char* what) {
        require(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64(const char* what) {
        require(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }

    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

    std::uint8_t u8(const char* what) {
        require(1, what);
        return bytes_[pos_++];
    }

    void f64_into(std::span<double> out, const char* what) {
        for (double& v : out) v = f64(what);
    }

    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

    void expect_done() {
        if (remaining() != 0) {
            throw FileFormatError(FileErrorCode::malformed,
                                  "malformed content: trailing bytes after the body");
        }
    }

private:
    void require(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw FileFormatError(FileErrorCode::truncated,
                                  std::string("truncated file: ran out of bytes reading ") +
                                      what);
        }
    }

    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FileFormatError(FileErrorCode::io_failure, "cannot open for reading: " + path);
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw FileFormatError(FileErrorCode::io_failure, "read failed: " + path);
    }
    return bytes;
}

inline void write_file_bytes(const std::string& path, std::span<const unsigned char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FileFormatError(FileErrorCode::io_failure, "cannot open for writing: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw FileFormatError(FileErrorCode::io_failure, "write failed: " + path);
    }
}

inline void check_version(std::uint32_t version) {
    if (version != kFileFormatVersion) {
        throw FileFormatError(FileErrorCode::version_mismatch,
                              "version mismatch: file version " + std::to_string(version) +
                                  ", expected " + std::to_string(kFileFormatVersion));
    }
}

/// Reads N and then N extents, validating each is nonzero and that the
/// running element product cannot overflow a 64-bit count.
inline std::vector<std::size_t> read_dims(ByteReader& reader) {
    const std::uint32_t order = reader.u32("order");
    if (order == 0) {
        throw FileFormatError(FileErrorCode::malformed, "malformed content: order is zero");
    }
    std::vector<std::size_t> dims(order);
    std::uint64_t elements = 1;
    for (std::uint32_t n = 0; n < order; ++n) {
        const std::uint64_t extent = reader.u64("extent");
        if (extent == 0) {
            throw FileFormatError(FileErrorCode::malformed,
                                  "malformed content: zero extent");
        }
        if (elements > (std::uint64_t{1} << 48) / extent) {
            throw FileFormatError(FileErrorCode::malformed,
                                  "malformed content: element count overflows");
        }
        elements *= extent;
        dims[n] = static_cast<std::size_t>(extent);
    }
    return dims;
}

}  // namespace detail

/// Writes a dense tensor: "DTNS" header with version, order, and extents,
/// then the elements verbatim in storage (mode-1 column-major) order.
inline void write_tensor(const std::string& path, const DenseTensor& x) {
    detail::ByteWriter writer;
    writer.magic(detail::kTensorMagic);
    writer.u32(kFileFormatVersion);
    writer.u32(static_cast<std::uint32_t>(x.order()));
    for (const std::size_t extent : x.dims()) writer.u64(extent);
    writer.f64_span(x.values());
    detail::write_file_bytes(path, writer.bytes());
}

/// Reads a tensor written by write_tensor, bit-exactly.
inline DenseTensor read_tensor(const std::string& path) {
    const std::vector<unsigned char> bytes = detail::read_file_bytes(path);
    detail::ByteReader reader{bytes};
    reader.expect_magic(detail::kTensorMagic);
    detail::check_version(reader.u32("version"));
    const std::vector<std::size_t> dims = detail::read_dims(reader);
    DenseTensor x(dims);
    reader.f64_into(std::span<double>(x.data(), x.size()), "tensor body");
    reader.expect_done();
    return x;
}

/// Writes a Tucker model: "DTKR" header with version, order, extents,
/// core ranks, the norm of the tensor the model was fit to, and the
/// optional scaling record; then the core (storage order) and the factor
/// matrices in mode order (each row-major, extent x rank).
inline void write_model(const std::string& path, const StoredModel& stored) {
    const TuckerModel& model = stored.model;
    if (model.factors.empty() || model.core.order() != model.factors.size()) {
        throw std::invalid_argument("model must have one factor per core mode");
    }
    for (std::size_t n = 0; n < model.factors.size(); ++n) {
        if (model.core.dim(n) != model.factors[n].cols()) {
            throw std::invalid_argument("factor column count must match the core extent");
        }
    }
    const std::vector<std::size_t> dims = model.dims();
    const std::vector<std::size_t> ranks = model.ranks();
    detail::ByteWriter writer;
    writer.magic(detail::kModelMagic);
    writer.u32(kFileFormatVersion);
    writer.u32(static_cast<std::uint32_t>(dims.size()));
    for (const std::size_t extent : dims) writer.u64(extent);
    for (const std::size_t rank : ranks) writer.u64(rank);
    writer.f64(model.original_norm);
    if (stored.scaling.has_value()) {
        const ScalingRecord& record = *stored.scaling;
        if (record.variable_mode >= dims.size() ||
            record.slice_count() != dims[record.variable_mode] ||
            record.stds.size() != record.slice_count() ||
            record.divided.size() != record.slice_count()) {
            throw FileFormatError(FileErrorCode::malformed,
                                  "malformed content: scaling record does not match dims");
        }
        writer.u8(1);
        writer.u64(record.variable_mode);
        writer.f64_span(record.means);
        writer.f64_span(record.stds);
        for (const std::uint8_t flag : record.divided) writer.u8(flag ? 1 : 0);
    } else {
        writer.u8(0);
    }
    writer.f64_span(model.core.values());
    for (const Matrix& factor : model.factors) writer.f64_span(factor.values());
    detail::write_file_bytes(path, writer.bytes());
}

/// Reads a model written by write_model, bit-exactly.
inline StoredModel read_model(const std::string& path) {
    const std::vector<unsigned char> bytes = detail::read_file_bytes(path);
    detail::ByteReader reader{bytes};
    reader.expect_magic(detail::kModelMagic);
    detail::check_version(reader.u32("version"));
    const std::vector<std::size_t> dims = detail::read_dims(reader);
    std::vector<std::size_t> ranks(dims.size());
    for (std::size_t n = 0; n < dims.size(); ++n) {
        const std::uint64_t rank = reader.u64("rank");
        if (rank == 0 || rank > dims[n]) {
            throw FileFormatError(FileErrorCode::malformed,
                                  "malformed content: rank outside 1..extent");
        }
        ranks[n] = static_cast<std::size_t>(rank);
    }
    StoredModel stored;
    stored.model.original_norm = reader.f64("original norm");
    const std::uint8_t has_scaling = reader.u8("scaling flag");
    if (has_scaling > 1) {
        throw FileFormatError(FileErrorCode::malformed,
                              "malformed content: scaling flag must be 0 or 1");
    }
    if (has_scaling == 1) {
        ScalingRecord record;
        const std::uint64_t mode = reader.u64("scaling mode");
        if (mode >= dims.size()) {
            throw FileFormatError(FileErrorCode::malformed,
                                  "malformed content: scaling mode out of range");
        }
        record.variable_mode = static_cast<std::size_t>(mode);
        const std::size_t slices = dims[record.variable_mode];
        record.means.resize(slices);
        record.stds.resize(slices);
        record.divided.resize(slices);
        reader.f64_into(record.means, "scaling means");
        reader.f64_into(record.stds, "scaling stds");
        for (std::uint8_t& flag : record.divided) flag = reader.u8("scaling flags");
        stored.scaling = std::move(record);
    }
    DenseTensor core(ranks);
    reader.f64_into(std::span<double>(core.data(), core.size()), "core body");
    stored.model.core = std::move(core);
    stored.model.factors.reserve(dims.size());
    for (std::size_t n = 0; n < dims.size(); ++n) {
        Matrix factor(dims[n], ranks[n]);
        reader.f64_into(std::span<double>(factor.data(), factor.size()), "factor body");
        stored.model.factors.push_back(std::move(factor));
    }
    reader.expect_done();
    return stored;
}

}  // namespace tuckit
