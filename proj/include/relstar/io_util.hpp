#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace relstar {

// JSON value for a double that may be non-finite: numbers stay numbers,
// infinities and NaN become the strings "inf", "-inf", "nan" because JSON
// has no encoding for them.
nlohmann::json json_number(double x);

// One CSV field under RFC-4180 quoting: doubles as %.17g, strings quoted
// when they contain a comma, quote, or newline.
std::string csv_field(double x);
std::string csv_field(const std::string& s);

// Joins pre-escaped fields and terminates the row with CRLF.
std::string csv_row(const std::vector<std::string>& fields);

// FNV-1a over the canonicalized key=value listing (keys sorted, one per
// line); the hash that every emitted artifact embeds as provenance.
std::uint64_t config_hash(const std::map<std::string, std::string>& kv);
std::string config_hash_hex(const std::map<std::string, std::string>& kv);

// Flat key=value config text: '#' comments and blank lines ignored; keys
// repeat the CLI flag names exactly. Throws on malformed lines.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Deterministic parallel map-reduce: splits [0, count) into per-worker
// slots; partial results are combined in slot order regardless of thread
// scheduling, so the reduction is bitwise reproducible for any worker count.
void parallel_for(int workers, long count,
                  const std::function<void(long begin, long end, int slot)>& body);

// Worker count resolution: explicit flag value if > 0, else RELSTAR_THREADS,
// else 1.
int resolve_threads(int flag_value);

// Writes text to path, replacing any existing file.
void write_file(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);

}  // namespace relstar
