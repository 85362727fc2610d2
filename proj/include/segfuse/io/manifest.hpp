#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "segfuse/core.hpp"
#include "segfuse/io/file.hpp"

namespace segfuse {

/// One dataset record. Paths are stored as given in the manifest; resolution
/// against the manifest's directory happens at load time.
struct ManifestRecord {
    std::string id;
    std::filesystem::path image_path;
    std::filesystem::path depth_path;
    std::optional<std::filesystem::path> label_path;
    std::optional<std::filesystem::path> logits_dep_path;
    std::optional<std::filesystem::path> logits_uda_path;
};

namespace detail {

inline std::string manifest_get_string(const nlohmann::json& obj, const char* key,
                                       const std::string& where) {
    require(obj.contains(key), where + ": missing key '" + key + "'");
    require(obj[key].is_string(), where + ": key '" + key + "' must be a string");
    return obj[key].get<std::string>();
}

inline std::optional<std::filesystem::path> manifest_opt_path(const nlohmann::json& obj,
                                                              const char* key,
                                                              const std::string& where) {
    if (!obj.contains(key))
        return std::nullopt;
    require(obj[key].is_string(), where + ": key '" + key + "' must be a string");
    return std::filesystem::path(obj[key].get<std::string>());
}

} // namespace detail

/// One manifest line, object keys in canonical order, no trailing newline.
inline std::string serialize_manifest_record(const ManifestRecord& r) {
    nlohmann::ordered_json obj;
    obj["id"] = r.id;
    obj["image"] = r.image_path.generic_string();
    obj["depth"] = r.depth_path.generic_string();
    if (r.label_path)
        obj["label"] = r.label_path->generic_string();
    if (r.logits_dep_path)
        obj["logits_dep"] = r.logits_dep_path->generic_string();
    if (r.logits_uda_path)
        obj["logits_uda"] = r.logits_uda_path->generic_string();
    return obj.dump();
}

inline void write_manifest(const std::filesystem::path& path,
                           std::span<const ManifestRecord> records) {
    std::string text;
    for (const ManifestRecord& r : records) {
        text += serialize_manifest_record(r);
        text += '\n';
    }
    write_text_atomic(path, text);
}

/// Parse a line-delimited manifest. Paths are resolved against the manifest's
/// directory and every referenced file must already exist, so a long batch
/// fails before it starts rather than mid-run.
inline std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    detail::require(in.good(), "cannot open manifest '" + path.string() + "'");
    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";

    static constexpr const char* kKnownKeys[] = {"id",    "image",      "depth",
                                                 "label", "logits_dep", "logits_uda"};
    std::vector<ManifestRecord> records;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const std::string where = "manifest '" + path.string() + "' line " + std::to_string(lineno);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            detail::fail(where + ": " + e.what());
        }
        detail::require(obj.is_object(), where + ": record must be a JSON object");
        for (const auto& item : obj.items()) {
            bool known = false;
            for (const char* k : kKnownKeys)
                known = known || item.key() == k;
            detail::require(known, where + ": unknown key '" + item.key() + "'");
        }

        ManifestRecord r;
        r.id = detail::manifest_get_string(obj, "id", where);
        detail::require(!r.id.empty(), where + ": empty id");
        detail::require(r.id.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZ"
                                               "abcdefghijklmnopqrstuvwxyz"
                                               "0123456789._-") == std::string::npos &&
                            r.id != "." && r.id != "..",
                        where + ": id '" + r.id +
                            "' is not filename-safe (allowed: letters, digits, . _ -)");
        detail::require(seen_ids.insert(r.id).second, where + ": duplicate id '" + r.id + "'");
        r.image_path = detail::manifest_get_string(obj, "image", where);
        r.depth_path = detail::manifest_get_string(obj, "depth", where);
        r.label_path = detail::manifest_opt_path(obj, "label", where);
        r.logits_dep_path = detail::manifest_opt_path(obj, "logits_dep", where);
        r.logits_uda_path = detail::manifest_opt_path(obj, "logits_uda", where);

        auto resolve = [&](std::filesystem::path& p) {
            if (p.is_relative())
                p = base / p;
            detail::require(std::filesystem::exists(p),
                            where + ": record '" + r.id + "' references missing file '" +
                                p.string() + "'");
        };
        resolve(r.image_path);
        resolve(r.depth_path);
        if (r.label_path)
            resolve(*r.label_path);
        if (r.logits_dep_path)
            resolve(*r.logits_dep_path);
        if (r.logits_uda_path)
            resolve(*r.logits_uda_path);
        records.push_back(std::move(r));
    }
    detail::require(!in.bad(), "read failed on manifest '" + path.string() + "'");
    return records;
}

} // namespace segfuse
