#pragma once

#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "lbs/runtime.hpp"

// Line-delimited JSON trace output: an events file, a population time
// series, and optional snapshots. The record layouts are described by
// docs/trace-schema.json.

namespace lbs {

using nlohmann::json;

inline json value_to_json(const Value& v) {
    if (v.is_chan()) return v.chan();
    if (v.is_const()) return v.num();
    if (v.is_unit()) return json::array();
    json arr = json::array();
    for (const auto& x : v.items()) arr.push_back(value_to_json(x));
    return arr;
}

inline json entity_to_json(const LocatedEntity& e) {
    return json{{"entity", e.entity},
                {"arg", value_to_json(e.arg)},
                {"pos", {e.pos.x, e.pos.y, e.pos.z}},
                {"scale", e.scale}};
}

inline json event_record(std::uint64_t stepIndex, double t, const StepRecord& rec) {
    json r{{"type", "event"}, {"step", stepIndex}, {"t", t}, {"kind", event_kind_name(rec.event.kind)}};
    if (rec.event.kind == EventKind::Com) r["channel"] = rec.event.channel;
    json parts = json::array();
    for (const auto& p : rec.participants) parts.push_back(entity_to_json(p));
    r["participants"] = parts;
    json prods = json::array();
    for (const auto& p : rec.products) prods.push_back(entity_to_json(p));
    r["products"] = prods;
    json chans = json::array();
    for (const auto& c : rec.new_channels)
        chans.push_back(json{{"name", c.name}, {"rate", c.info.rate}, {"radius", c.info.radius}});
    r["new_channels"] = chans;
    r["rejected"] = rec.rejected_events;
    return r;
}

inline json population_record(double t, const std::vector<LocatedEntity>& entities) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& e : entities) ++counts[e.entity];
    return json{{"type", "population"}, {"t", t}, {"counts", counts}};
}

inline json snapshot_record(double t, const std::vector<LocatedEntity>& entities) {
    json arr = json::array();
    for (const auto& e : entities) arr.push_back(entity_to_json(e));
    return json{{"type", "snapshot"}, {"t", t}, {"entities", arr}};
}

inline json end_record(double t, std::uint64_t steps, const std::string& cause) {
    return json{{"type", "end"}, {"t", t}, {"steps", steps}, {"cause", cause}};
}

class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    }
    void write(const json& record) { out_ << record.dump() << "\n"; }
    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

} // namespace lbs
