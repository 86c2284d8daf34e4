#include "emv/net/config_text.h"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace emv::config {

namespace {

std::string location(const std::string &source, int line) {
    return source + ":" + std::to_string(line) + ": ";
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

// Strips a trailing comment that is not inside a string literal.
std::string_view strip_comment(std::string_view s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\'))
            in_string = !in_string;
        else if (s[i] == '#' && !in_string)
            return s.substr(0, i);
    }
    return s;
}

bool valid_key(std::string_view key) {
    if (key.empty())
        return false;
    for (char c : key)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
            return false;
    return true;
}

class ValueParser {
public:
    ValueParser(std::string_view text, const std::string &source, int line)
        : text_(text), source_(source), line_(line) {}

    Value parse_all() {
        Value v = parse_value();
        skip_ws();
        if (pos_ != text_.size())
            error("unexpected trailing characters");
        return v;
    }

private:
    [[noreturn]] void error(const std::string &what) const {
        throw SchemaError(location(source_, line_) + what);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    Value parse_value() {
        skip_ws();
        if (pos_ >= text_.size())
            error("missing value");
        char c = text_[pos_];
        Value out;
        out.line = line_;
        if (c == '"') {
            out.data = parse_string();
        } else if (c == '[') {
            out.data = parse_array();
        } else if (text_.substr(pos_, 4) == "true") {
            pos_ += 4;
            out.data = true;
        } else if (text_.substr(pos_, 5) == "false") {
            pos_ += 5;
            out.data = false;
        } else {
            parse_number(out);
        }
        return out;
    }

    std::string parse_string() {
        ++pos_;
        std::string s;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
                char e = text_[pos_ + 1];
                s.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e);
                pos_ += 2;
                continue;
            }
            s.push_back(text_[pos_++]);
        }
        if (pos_ >= text_.size())
            error("unterminated string");
        ++pos_;
        return s;
    }

    Value::Array parse_array() {
        ++pos_;
        Value::Array items;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ']') {
            ++pos_;
            return items;
        }
        while (true) {
            items.push_back(parse_value());
            skip_ws();
            if (pos_ >= text_.size())
                error("unterminated array");
            if (text_[pos_] == ',') {
                ++pos_;
                skip_ws();
                if (pos_ < text_.size() && text_[pos_] == ']') {
                    ++pos_;
                    return items;
                }
                continue;
            }
            if (text_[pos_] == ']') {
                ++pos_;
                return items;
            }
            error("expected ',' or ']' in array");
        }
    }

    void parse_number(Value &out) {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                text_[pos_] == '-' || text_[pos_] == '+' || text_[pos_] == '_'))
            ++pos_;
        std::string token(text_.substr(start, pos_ - start));
        std::erase(token, '_');
        if (token.empty())
            error("invalid value");
        bool is_float = token.find_first_of(".eEn") != std::string::npos;
        if (!is_float) {
            std::int64_t iv = 0;
            auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), iv);
            if (ec == std::errc() && ptr == token.data() + token.size()) {
                out.data = iv;
                return;
            }
        }
        try {
            std::size_t used = 0;
            double dv = std::stod(token, &used);
            if (used != token.size())
                error("invalid number '" + token + "'");
            out.data = dv;
        } catch (const std::logic_error &) {
            error("invalid value '" + token + "'");
        }
    }

    std::string_view text_;
    const std::string &source_;
    int line_;
    std::size_t pos_ = 0;
};

} // namespace

void Table::set(const std::string &key, Value value) {
    if (entries_.count(key))
        throw SchemaError(location(source_, value.line) + "[" + name_ + "] duplicate key '" + key + "'");
    entries_.emplace(key, std::move(value));
}

void Table::fail(const std::string &key, const std::string &what) const {
    int line = line_;
    auto it = entries_.find(key);
    if (it != entries_.end())
        line = it->second.line;
    throw SchemaError(location(source_, line) + "[" + name_ + "] field '" + key + "': " + what);
}

const Value &Table::require(const std::string &key) const {
    auto it = entries_.find(key);
    if (it == entries_.end())
        fail(key, "missing required field");
    return it->second;
}

std::int64_t Table::get_int(const std::string &key) const {
    const Value &v = require(key);
    if (auto p = std::get_if<std::int64_t>(&v.data))
        return *p;
    fail(key, "expected an integer");
}

double Table::get_double(const std::string &key) const {
    const Value &v = require(key);
    if (auto p = std::get_if<double>(&v.data))
        return *p;
    if (auto p = std::get_if<std::int64_t>(&v.data))
        return static_cast<double>(*p);
    fail(key, "expected a number");
}

bool Table::get_bool(const std::string &key) const {
    const Value &v = require(key);
    if (auto p = std::get_if<bool>(&v.data))
        return *p;
    fail(key, "expected true or false");
}

std::string Table::get_string(const std::string &key) const {
    const Value &v = require(key);
    if (auto p = std::get_if<std::string>(&v.data))
        return *p;
    fail(key, "expected a string");
}

std::vector<double> Table::get_double_array(const std::string &key) const {
    const Value &v = require(key);
    auto arr = std::get_if<Value::Array>(&v.data);
    if (!arr)
        fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const Value &item : *arr) {
        if (auto p = std::get_if<double>(&item.data))
            out.push_back(*p);
        else if (auto q = std::get_if<std::int64_t>(&item.data))
            out.push_back(static_cast<double>(*q));
        else
            fail(key, "expected an array of numbers");
    }
    return out;
}

std::int64_t Table::get_int(const std::string &key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}
double Table::get_double(const std::string &key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}
bool Table::get_bool(const std::string &key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}
std::string Table::get_string(const std::string &key, const std::string &fallback) const {
    return has(key) ? get_string(key) : fallback;
}

const Table *Document::table(const std::string &name) const {
    auto it = tables.find(name);
    return it == tables.end() ? nullptr : &it->second;
}

const std::vector<Table> &Document::array(const std::string &name) const {
    static const std::vector<Table> empty;
    auto it = arrays.find(name);
    return it == arrays.end() ? empty : it->second;
}

Document parse(std::string_view text, const std::string &source_name) {
    Document doc;
    doc.source = source_name;
    Table root(source_name, "", 1);
    Table *current = &root;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view raw = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        std::string_view line = trim(strip_comment(raw));
        if (line.empty()) {
            if (end == text.size())
                break;
            continue;
        }
        if (line.starts_with("[[")) {
            if (!line.ends_with("]]"))
                throw SchemaError(location(source_name, line_no) + "malformed array-of-tables header");
            std::string name(trim(line.substr(2, line.size() - 4)));
            if (!valid_key(name))
                throw SchemaError(location(source_name, line_no) + "invalid table name '" + name + "'");
            if (doc.tables.count(name))
                throw SchemaError(location(source_name, line_no) + "'" + name + "' already defined as a table");
            auto &vec = doc.arrays[name];
            vec.emplace_back(source_name, name + "[" + std::to_string(vec.size()) + "]", line_no);
            current = &vec.back();
        } else if (line.starts_with("[")) {
            if (!line.ends_with("]"))
                throw SchemaError(location(source_name, line_no) + "malformed table header");
            std::string name(trim(line.substr(1, line.size() - 2)));
            if (!valid_key(name))
                throw SchemaError(location(source_name, line_no) + "invalid table name '" + name + "'");
            if (doc.tables.count(name) || doc.arrays.count(name))
                throw SchemaError(location(source_name, line_no) + "table '" + name + "' defined twice");
            current = &doc.tables.emplace(name, Table(source_name, name, line_no)).first->second;
        } else {
            std::size_t eq = line.find('=');
            if (eq == std::string_view::npos)
                throw SchemaError(location(source_name, line_no) + "expected 'key = value'");
            std::string key(trim(line.substr(0, eq)));
            if (!valid_key(key))
                throw SchemaError(location(source_name, line_no) + "invalid key '" + key + "'");
            ValueParser vp(trim(line.substr(eq + 1)), source_name, line_no);
            current->set(key, vp.parse_all());
        }
        if (end == text.size())
            break;
    }
    if (!root.entries().empty())
        throw SchemaError(location(source_name, root.entries().begin()->second.line) +
                          "key outside of any table");
    return doc;
}

std::string format_double(double v) {
    char buf[64];
    for (int precision = 6; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::stod(buf) == v)
            break;
    }
    std::string s(buf);
    if (s.find_first_of(".eEn") == std::string::npos)
        s += ".0";
    return s;
}

} // namespace emv::config
