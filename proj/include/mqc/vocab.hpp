#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "mqc/errors.hpp"

namespace mqc {

struct ClassEntry {
    int id = 0;
    std::string name;
    bool operator==(const ClassEntry&) const = default;
};

// Ordered class list; ids are unique and contiguous from 1.
struct ClassVocabulary {
    std::vector<ClassEntry> entries;

    static ClassVocabulary from_names(const std::vector<std::string>& names) {
        ClassVocabulary v;
        v.entries.reserve(names.size());
        for (std::size_t i = 0; i < names.size(); ++i)
            v.entries.push_back({static_cast<int>(i) + 1, names[i]});
        v.validate();
        return v;
    }

    int size() const { return static_cast<int>(entries.size()); }

    const std::string& name_of(int class_id) const {
        for (const auto& e : entries)
            if (e.id == class_id) return e.name;
        throw ValueError("class_id not in vocabulary: " + std::to_string(class_id));
    }

    bool contains(int class_id) const {
        return class_id >= 1 && class_id <= size() && entries[class_id - 1].id == class_id;
    }

    void validate() const {
        std::unordered_set<std::string> names;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].id != static_cast<int>(i) + 1)
                throw ValueError("vocabulary ids must be contiguous from 1");
            if (entries[i].name.empty())
                throw ValueError("vocabulary names must be non-empty");
            if (!names.insert(entries[i].name).second)
                throw ValueError("duplicate vocabulary name: " + entries[i].name);
        }
    }
};

enum class Sex { male, female, unknown };

inline const char* to_string(Sex s) {
    switch (s) {
        case Sex::male: return "male";
        case Sex::female: return "female";
        default: return "unknown";
    }
}

inline Sex sex_from_string(const std::string& s) {
    if (s == "male") return Sex::male;
    if (s == "female") return Sex::female;
    if (s == "unknown") return Sex::unknown;
    throw ValueError("unknown sex value: " + s);
}

struct SubjectMeta {
    std::string volume_id;
    Sex sex = Sex::unknown;
    std::optional<double> age; // years

    void validate() const {
        if (age && *age < 0) throw ValueError("age must be non-negative");
    }
};

} // namespace mqc
