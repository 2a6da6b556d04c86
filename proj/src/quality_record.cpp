#include "mqc/quality_record.hpp"

#include <fstream>

#include "json.hpp"

#include "mqc/errors.hpp"

namespace mqc {

using nlohmann::json;

void save_quality_records(const std::vector<QualityRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write records: " + path);
    for (const auto& r : records) {
        json slices = json::array();
        for (const auto& s : r.slices) slices.push_back(json{{"z", s.z}, {"value", s.value}});
        json j{{"volume_id", r.volume_id},
               {"class_id", r.class_id},
               {"predicted_dsc", r.predicted_dsc},
               {"slices", slices}};
        if (r.actual_dsc) j["actual_dsc"] = *r.actual_dsc;
        out << j.dump() << "\n";
    }
}

std::vector<QualityRecord> load_quality_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open records: " + path);
    std::vector<QualityRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError("bad record at " + path + ":" + std::to_string(line_no) + ": " +
                              e.what());
        }
        QualityRecord r;
        r.volume_id = j.at("volume_id").get<std::string>();
        r.class_id = j.at("class_id").get<int>();
        r.predicted_dsc = j.at("predicted_dsc").get<double>();
        if (j.contains("actual_dsc")) r.actual_dsc = j.at("actual_dsc").get<double>();
        if (j.contains("slices"))
            for (const auto& s : j.at("slices"))
                r.slices.push_back({s.at("z").get<int>(), s.at("value").get<double>()});
        records.push_back(std::move(r));
    }
    return records;
}

} // namespace mqc
