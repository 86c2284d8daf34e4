#pragma once

// Minimal reader/writer for the TOML subset used by scenario files:
//   [table]            plain tables
//   [[table]]          arrays of tables
//   key = value        integers, floats, booleans, "strings", [inline, arrays]
//   # comments
// Every value remembers the line it came from so schema errors can point at it.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace emv::config {

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Value {
    using Array = std::vector<Value>;
    std::variant<bool, std::int64_t, double, std::string, Array> data;
    int line = 0;

    bool is_number() const {
        return std::holds_alternative<std::int64_t>(data) || std::holds_alternative<double>(data);
    }
};

class Table {
public:
    Table() = default;
    Table(std::string source, std::string name, int line)
        : source_(std::move(source)), name_(std::move(name)), line_(line) {}

    const std::string &name() const { return name_; }
    int line() const { return line_; }
    bool has(const std::string &key) const { return entries_.count(key) != 0; }
    void set(const std::string &key, Value value);
    const std::map<std::string, Value> &entries() const { return entries_; }

    std::int64_t get_int(const std::string &key) const;
    double get_double(const std::string &key) const;
    bool get_bool(const std::string &key) const;
    std::string get_string(const std::string &key) const;
    std::vector<double> get_double_array(const std::string &key) const;

    std::int64_t get_int(const std::string &key, std::int64_t fallback) const;
    double get_double(const std::string &key, double fallback) const;
    bool get_bool(const std::string &key, bool fallback) const;
    std::string get_string(const std::string &key, const std::string &fallback) const;

    /// Error message of the form "<source>:<line>: [table] field 'key': what".
    [[noreturn]] void fail(const std::string &key, const std::string &what) const;

private:
    const Value &require(const std::string &key) const;

    std::string source_;
    std::string name_;
    int line_ = 0;
    std::map<std::string, Value> entries_;
};

struct Document {
    std::string source;
    std::map<std::string, Table> tables;
    std::map<std::string, std::vector<Table>> arrays;

    const Table *table(const std::string &name) const;
    const std::vector<Table> &array(const std::string &name) const;
};

Document parse(std::string_view text, const std::string &source_name);

/// Formats a double so that parsing it back yields the identical value.
std::string format_double(double v);

} // namespace emv::config
