#pragma once

// Flat key-value structured text shared by MDP, feature, checkpoint and config files.
//
//   # comment
//   n_states = 5
//   transition = 0.1 0.9 ...
//
// Values are whitespace-separated tokens. Keys appear at most once. Numbers are
// written with 17 significant digits so files round-trip bit-exactly.

#include "gail/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace gail {

class KvDocument {
public:
    static KvDocument parse(std::istream& in);
    static KvDocument load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::vector<std::string>& keys() const { return order_; }

    const std::vector<std::string>& tokens(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    long long get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    Vector get_vector(const std::string& key) const;
    std::vector<long long> get_int_list(const std::string& key) const;

    void set(const std::string& key, std::vector<std::string> tokens);
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, long long value);
    void set(const std::string& key, double value);
    void set(const std::string& key, const Vector& values);

    void write(std::ostream& out) const;
    std::string to_string() const;

private:
    std::map<std::string, std::vector<std::string>> values_;
    std::vector<std::string> order_;
};

/// Exact decimal form of a double (17 significant digits).
std::string format_double(double v);

/// Writes `content` to a temporary sibling of `path` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace gail
