#include "tbsim/io.hpp"

#include <array>
#include <bit>
#include <cinttypes>
#include <cstring>

namespace tbsim::io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "record serialization assumes a little-endian host");

void put_u64(std::FILE* f, uint64_t v) {
    if (std::fwrite(&v, sizeof v, 1, f) != 1) throw IoError("write failed");
}

void put_record(std::FILE* f, const mc::DetectionRecord& r) {
    const uint8_t tag = static_cast<uint8_t>(r.channel);
    if (std::fwrite(&tag, 1, 1, f) != 1 ||
        std::fwrite(&r.timestamp_ns, sizeof(double), 1, f) != 1)
        throw IoError("write failed");
}

} // namespace

std::string format_double(double v) {
    std::array<char, 32> buf;
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return std::string(buf.data());
}

RecordFileWriter::RecordFileWriter(const std::filesystem::path& path, Format format)
    : format_(format), path_(path) {
    file_ = std::fopen(path.c_str(), "wb");
    if (!file_) throw IoError("cannot open " + path.string() + " for writing");
    if (format_ == Format::Binary) {
        put_u64(file_, 0); // placeholder count, patched on close
    } else {
        std::fputs("channel,timestamp_ns\n", file_);
    }
}

RecordFileWriter::~RecordFileWriter() {
    try {
        close();
    } catch (...) {
        // destructor must not throw; close() explicitly to observe errors
    }
}

void RecordFileWriter::on_record(const mc::DetectionRecord& r) {
    if (!file_) throw IoError("writer already closed");
    if (format_ == Format::Binary) {
        put_record(file_, r);
    } else {
        std::fprintf(file_, "%s,%s\n", mc::channel_name(r.channel),
                     format_double(r.timestamp_ns).c_str());
    }
    ++count_;
}

void RecordFileWriter::close() {
    if (!file_) return;
    if (format_ == Format::Binary) {
        if (std::fseek(file_, 0, SEEK_SET) != 0) throw IoError("seek failed on " + path_.string());
        put_u64(file_, count_);
    }
    const int rc = std::fclose(file_);
    file_ = nullptr;
    if (rc != 0) throw IoError("close failed on " + path_.string());
}

void write_records_binary(const std::filesystem::path& path,
                          std::span<const mc::DetectionRecord> records) {
    RecordFileWriter w(path, RecordFileWriter::Format::Binary);
    for (const auto& r : records) w.on_record(r);
    w.close();
}

void write_records_csv(const std::filesystem::path& path,
                       std::span<const mc::DetectionRecord> records) {
    RecordFileWriter w(path, RecordFileWriter::Format::Csv);
    for (const auto& r : records) w.on_record(r);
    w.close();
}

std::vector<mc::DetectionRecord> read_records_binary(const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path.string());
    uint64_t n = 0;
    if (std::fread(&n, sizeof n, 1, f) != 1) {
        std::fclose(f);
        throw IoError("truncated event file " + path.string());
    }
    std::vector<mc::DetectionRecord> out;
    out.reserve(n);
    for (uint64_t i = 0; i < n; ++i) {
        uint8_t tag;
        double t;
        if (std::fread(&tag, 1, 1, f) != 1 || std::fread(&t, sizeof t, 1, f) != 1) {
            std::fclose(f);
            throw IoError("truncated event file " + path.string());
        }
        if (tag > 5) {
            std::fclose(f);
            throw IoError("bad channel tag in " + path.string());
        }
        out.push_back({static_cast<mc::Channel>(tag), t});
    }
    std::fclose(f);
    return out;
}

std::vector<mc::DetectionRecord> read_records_csv(const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<mc::DetectionRecord> out;
    char line[128];
    bool header = true;
    while (std::fgets(line, sizeof line, f)) {
        if (header) {
            header = false;
            continue;
        }
        char* comma = std::strchr(line, ',');
        if (!comma) continue;
        *comma = '\0';
        const auto ch = mc::channel_from_name(line);
        if (!ch) {
            std::fclose(f);
            throw IoError("bad channel name in " + path.string());
        }
        out.push_back({*ch, std::strtod(comma + 1, nullptr)});
    }
    std::fclose(f);
    return out;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    const bool ok = std::fwrite(content.data(), 1, content.size(), f) == content.size();
    if (std::fclose(f) != 0 || !ok) throw IoError("write failed on " + tmp.string());
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed for " + path.string() + ": " + ec.message());
}

} // namespace tbsim::io
