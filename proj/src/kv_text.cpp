#include "gail/kv_text.hpp"

#include "gail/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gail {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& token) {
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw ParseError("key '" + key + "': '" + token + "' is not a number");
    }
}

long long parse_int(const std::string& key, const std::string& token) {
    long long v = 0;
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw ParseError("key '" + key + "': '" + token + "' is not an integer");
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

KvDocument KvDocument::parse(std::istream& in) {
    KvDocument doc;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty key");
        if (doc.has(key)) throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        std::istringstream rest(line.substr(eq + 1));
        std::vector<std::string> tokens;
        for (std::string tok; rest >> tok;) tokens.push_back(tok);
        doc.set(key, std::move(tokens));
    }
    return doc;
}

KvDocument KvDocument::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return parse(in);
}

const std::vector<std::string>& KvDocument::tokens(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ParseError("missing key '" + key + "'");
    return it->second;
}

std::string KvDocument::get_string(const std::string& key) const {
    const auto& t = tokens(key);
    if (t.size() != 1) throw ParseError("key '" + key + "': expected a single value");
    return t.front();
}

long long KvDocument::get_int(const std::string& key) const { return parse_int(key, get_string(key)); }

std::uint64_t KvDocument::get_u64(const std::string& key) const {
    const std::string s = get_string(key);
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw ParseError("key '" + key + "': '" + s + "' is not an unsigned integer");
    return v;
}

double KvDocument::get_double(const std::string& key) const { return parse_double(key, get_string(key)); }

bool KvDocument::get_bool(const std::string& key) const {
    const std::string s = get_string(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ParseError("key '" + key + "': '" + s + "' is not a boolean");
}

Vector KvDocument::get_vector(const std::string& key) const {
    const auto& t = tokens(key);
    Vector v(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_double(key, t[i]);
    return v;
}

std::vector<long long> KvDocument::get_int_list(const std::string& key) const {
    std::vector<long long> out;
    for (const auto& tok : tokens(key)) out.push_back(parse_int(key, tok));
    return out;
}

void KvDocument::set(const std::string& key, std::vector<std::string> tokens) {
    if (!has(key)) order_.push_back(key);
    values_[key] = std::move(tokens);
}

void KvDocument::set(const std::string& key, const std::string& value) { set(key, std::vector<std::string>{value}); }

void KvDocument::set(const std::string& key, long long value) { set(key, std::to_string(value)); }

void KvDocument::set(const std::string& key, double value) { set(key, format_double(value)); }

void KvDocument::set(const std::string& key, const Vector& values) {
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) tokens.push_back(format_double(values[i]));
    set(key, std::move(tokens));
}

void KvDocument::write(std::ostream& out) const {
    for (const auto& key : order_) {
        out << key << " =";
        for (const auto& tok : values_.at(key)) out << ' ' << tok;
        out << '\n';
    }
}

std::string KvDocument::to_string() const {
    std::ostringstream out;
    write(out);
    return out.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace gail
