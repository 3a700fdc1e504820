// io.hpp
// Serialization of detection-record streams and result tables.
//
// Binary event format: an 8-byte little-endian record count, then one record
// per entry as a 1-byte channel tag (S1=0, S2=1, I1=2, I2=3, ready=4,
// trigger=5) followed by an 8-byte little-endian IEEE-754 double timestamp in
// nanoseconds. CSV event format: header "channel,timestamp_ns", channel by
// name, timestamp with full round-trip precision.

#pragma once

#include <cstdio>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tbsim/montecarlo.hpp"

namespace tbsim::io {

/// Full-precision, locale-independent formatting (round-trips exactly).
std::string format_double(double v);

/// Streaming writer usable as a simulation sink; the count prefix of the
/// binary format is patched on close.
class RecordFileWriter : public mc::RecordSink {
public:
    enum class Format { Binary, Csv };
    RecordFileWriter(const std::filesystem::path& path, Format format);
    ~RecordFileWriter() override;
    RecordFileWriter(const RecordFileWriter&) = delete;
    RecordFileWriter& operator=(const RecordFileWriter&) = delete;

    void on_record(const mc::DetectionRecord& r) override;
    void close();
    uint64_t count() const { return count_; }

private:
    std::FILE* file_ = nullptr;
    Format format_;
    uint64_t count_ = 0;
    std::filesystem::path path_;
};

void write_records_binary(const std::filesystem::path& path,
                          std::span<const mc::DetectionRecord> records);
void write_records_csv(const std::filesystem::path& path,
                       std::span<const mc::DetectionRecord> records);

std::vector<mc::DetectionRecord> read_records_binary(const std::filesystem::path& path);
std::vector<mc::DetectionRecord> read_records_csv(const std::filesystem::path& path);

/// Write text atomically (temp file + rename).
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

} // namespace tbsim::io
