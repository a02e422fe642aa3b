#include "qalign/chain_io.hpp"

#include <cmath>

namespace qalign {

namespace {

ordered_json scored_to_json(const ScoredSequence& s) {
  ordered_json j;
  j["text"] = s.seq.text();
  j["reward"] = s.reward;
  j["len"] = s.seq.length();
  return j;
}

ScoredSequence scored_from_json(const nlohmann::json& j, UnitKind unit) {
  ScoredSequence s{Sequence::parse(j.at("text").get<std::string>(), unit), j.at("reward").get<double>(),
                   std::nullopt};
  if (j.contains("len") && j.at("len").get<std::size_t>() != s.seq.length()) {
    throw Error("chain record length does not match its text");
  }
  return s;
}

}  // namespace

ordered_json to_json(const ChainRecord& record) {
  ordered_json j;
  j["step"] = record.step;
  j["state"] = scored_to_json(record.state);
  j["proposal"] = record.proposal ? scored_to_json(*record.proposal) : ordered_json(nullptr);
  j["cut_index"] = record.cut_index ? ordered_json(*record.cut_index) : ordered_json(nullptr);
  j["alpha"] = record.alpha;
  j["accepted"] = record.accepted;
  j["tokens_generated"] = record.tokens_generated;
  return j;
}

ChainRecord chain_record_from_json(const nlohmann::json& j, UnitKind unit) {
  ChainRecord r{.step = j.at("step").get<std::int64_t>(),
                .state = scored_from_json(j.at("state"), unit),
                .proposal = std::nullopt,
                .cut_index = std::nullopt,
                .alpha = j.at("alpha").get<double>(),
                .accepted = j.at("accepted").get<bool>(),
                .tokens_generated = j.at("tokens_generated").get<std::int64_t>()};
  if (!j.at("proposal").is_null()) r.proposal = scored_from_json(j.at("proposal"), unit);
  if (!j.at("cut_index").is_null()) r.cut_index = j.at("cut_index").get<std::size_t>();
  r.validate();
  return r;
}

ChainWriter::ChainWriter(const std::filesystem::path& path, std::int64_t next_step)
    : out_(path, std::ios::app), next_step_(next_step) {
  if (!out_) throw Error("cannot open chain file " + path.string());
}

void ChainWriter::append(const ChainRecord& record) {
  if (record.step != next_step_) {
    throw Error("chain records must be gapless: expected step " + std::to_string(next_step_) + ", got " +
                std::to_string(record.step));
  }
  out_ << to_json(record).dump() << '\n';
  out_.flush();
  if (!out_) throw Error("failed writing chain record");
  ++next_step_;
}

std::vector<ChainRecord> read_chain(const std::filesystem::path& path, UnitKind unit) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open chain file " + path.string());
  std::vector<ChainRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // torn final line
      throw Error("malformed chain record in " + path.string());
    }
    ChainRecord r = chain_record_from_json(j, unit);
    if (r.step != static_cast<std::int64_t>(records.size())) {
      throw Error("chain file " + path.string() + " has a gap at step " + std::to_string(records.size()));
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace qalign
