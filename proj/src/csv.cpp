#include "cisr/csv.hpp"

#include <charconv>
#include <chrono>
#include <system_error>

#include "cisr/errors.hpp"

namespace cisr {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_int(std::int64_t v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

CsvFile::CsvFile(const std::filesystem::path& path, const std::string& schema_tag,
                 const std::vector<std::string>& header)
    : path_(path), schema_(schema_tag), arity_(header.size()) {
    if (header.empty()) throw ConfigInvalid("CsvFile: empty header");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw ConfigInvalid("CsvFile: cannot open " + path.string());
    out_ << "#schema=" << schema_ << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(header[i]);
    }
    out_ << "\n";
}

CsvFile::~CsvFile() {
    try {
        close();
    } catch (...) {
    }
}

void CsvFile::row(const std::vector<std::string>& cells) {
    if (closed_) throw ConfigInvalid("CsvFile: row after close");
    if (cells.size() != arity_)
        throw ConfigInvalid("CsvFile: row arity " + std::to_string(cells.size()) +
                            " does not match header arity " + std::to_string(arity_));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(cells[i]);
    }
    out_ << "\n";
    ++rows_;
}

void CsvFile::close() {
    if (closed_) return;
    closed_ = true;
    out_.flush();
    out_.close();

    // Sidecar keeps everything nondeterministic out of the csv body.
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch());
    std::ofstream meta(path_.string() + ".meta.json", std::ios::binary | std::ios::trunc);
    meta << "{\n"
         << "  \"schema\": \"" << schema_ << "\",\n"
         << "  \"rows\": " << rows_ << ",\n"
         << "  \"created_unix\": " << secs.count() << "\n"
         << "}\n";
}

}  // namespace cisr
