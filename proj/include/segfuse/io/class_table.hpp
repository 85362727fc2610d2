#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "segfuse/core.hpp"
#include "segfuse/io/file.hpp"

namespace segfuse {

/// JSON class-table document: {"ignore_id": 255, "classes": [{"id": 0,
/// "name": "road", "thing": false}, ...]}. ignore_id is optional.
inline ClassTable class_table_from_json(const std::string& text, const std::string& what) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        detail::fail(what + ": " + e.what());
    }
    detail::require(doc.is_object() && doc.contains("classes") && doc["classes"].is_array(),
                    what + ": expected an object with a 'classes' array");
    int ignore_id = 255;
    if (doc.contains("ignore_id")) {
        detail::require(doc["ignore_id"].is_number_integer(),
                        what + ": 'ignore_id' must be an integer");
        ignore_id = doc["ignore_id"].get<int>();
    }
    std::vector<ClassEntry> entries;
    for (const auto& c : doc["classes"]) {
        detail::require(c.is_object() && c.contains("id") && c.contains("name"),
                        what + ": each class needs 'id' and 'name'");
        detail::require(c["id"].is_number_integer() && c["name"].is_string(),
                        what + ": class 'id' must be an integer and 'name' a string");
        ClassEntry e;
        e.id = c["id"].get<int>();
        e.name = c["name"].get<std::string>();
        if (c.contains("thing")) {
            detail::require(c["thing"].is_boolean(), what + ": class 'thing' must be a boolean");
            e.is_thing = c["thing"].get<bool>();
        }
        entries.push_back(std::move(e));
    }
    try {
        return ClassTable(std::move(entries), ignore_id);
    } catch (const Error& e) {
        detail::fail(what + ": " + e.what());
    }
}

inline nlohmann::ordered_json class_table_json(const ClassTable& table) {
    nlohmann::ordered_json doc;
    doc["ignore_id"] = table.ignore_id();
    doc["classes"] = nlohmann::ordered_json::array();
    for (const ClassEntry& c : table.classes()) {
        nlohmann::ordered_json e;
        e["id"] = c.id;
        e["name"] = c.name;
        e["thing"] = c.is_thing;
        doc["classes"].push_back(std::move(e));
    }
    return doc;
}

inline std::string class_table_to_json(const ClassTable& table) {
    return class_table_json(table).dump(2) + "\n";
}

/// Resolve a --classes argument: an existing file is parsed as a JSON table,
/// anything else is treated as a preset name.
inline ClassTable resolve_class_table(const std::string& spec) {
    if (std::filesystem::exists(spec)) {
        const auto bytes = read_file(spec);
        return class_table_from_json(std::string(bytes.begin(), bytes.end()),
                                     "class table '" + spec + "'");
    }
    return default_class_table(spec);
}

} // namespace segfuse
