#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace cisr {

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);
std::string format_int(std::int64_t v);

// RFC-style quoting, applied only when a cell needs it.
std::string csv_escape(const std::string& cell);

// Deterministic CSV emitter. The file starts with a `#schema=<tag>` line and
// the pinned header row; every byte of the body is a pure function of the
// rows written. Wall-clock metadata goes to a `<name>.meta.json` sidecar on
// close so re-runs stay byte-identical.
class CsvFile {
  public:
    CsvFile(const std::filesystem::path& path, const std::string& schema_tag,
            const std::vector<std::string>& header);
    ~CsvFile();

    CsvFile(const CsvFile&) = delete;
    CsvFile& operator=(const CsvFile&) = delete;

    void row(const std::vector<std::string>& cells);
    void close();  // idempotent

    const std::filesystem::path& path() const { return path_; }
    std::int64_t rows_written() const { return rows_; }

  private:
    std::filesystem::path path_;
    std::string schema_;
    std::size_t arity_ = 0;
    std::int64_t rows_ = 0;
    std::ofstream out_;
    bool closed_ = false;
};

}  // namespace cisr
