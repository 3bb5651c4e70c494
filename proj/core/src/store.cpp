#include "ecad/store.hpp"

#include <algorithm>
#include <map>

namespace ecad::store {
namespace {

IndividualRecord individual_from_json(const Json& j) {
  IndividualRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.generation = j.at("generation").get<int>();
  r.genome = genome_from_json(j.at("genome"));
  r.card = score_card_from_json(j.at("scores"));
  r.score = j.at("score").get<double>();
  return r;
}

GenerationRecord generation_from_json(const Json& j) {
  GenerationRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.generation = j.at("generation").get<int>();
  r.best_score = j.at("best_score").get<double>();
  r.mean_score = j.at("mean_score").get<double>();
  r.best_id = j.at("best_id").get<GenomeId>();
  r.population = j.at("population").get<std::int64_t>();
  r.evaluated = j.at("evaluated").get<std::int64_t>();
  return r;
}

}  // namespace

Json to_json(const IndividualRecord& r) {
  Json j = Json::object();
  j["kind"] = "individual";
  j["seq"] = r.seq;
  j["generation"] = r.generation;
  j["genome_id"] = r.genome.id;
  j["score"] = r.score;
  j["genome"] = to_json(r.genome);
  j["scores"] = to_json(r.card);
  return j;
}

Json to_json(const GenerationRecord& r) {
  Json j = Json::object();
  j["kind"] = "generation";
  j["seq"] = r.seq;
  j["generation"] = r.generation;
  j["best_score"] = r.best_score;
  j["mean_score"] = r.mean_score;
  j["best_id"] = r.best_id;
  j["population"] = r.population;
  j["evaluated"] = r.evaluated;
  return j;
}

EcadDb::EcadDb(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::filesystem::exists(path_)) load();
}

void EcadDb::load() {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw StoreError("cannot open " + path_.string());
  std::string line;
  std::uintmax_t offset = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool complete = !in.eof();
    const std::uintmax_t next = offset + line.size() + (complete ? 1 : 0);
    if (line.empty()) {
      offset = next;
      continue;
    }
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error&) {
      if (!complete) break;  // torn final write
      throw StoreError(path_.string() + ":" + std::to_string(line_no) + ": corrupt record");
    }
    const auto kind = j.value("kind", "");
    if (kind == "individual") {
      individuals_.push_back(individual_from_json(j));
    } else if (kind == "generation") {
      generations_.push_back(generation_from_json(j));
    } else {
      throw StoreError(path_.string() + ":" + std::to_string(line_no) + ": unknown kind \"" +
                       kind + "\"");
    }
    next_seq_ = std::max(next_seq_, j.at("seq").get<std::uint64_t>() + 1);
    offset = next;
    if (!complete) {
      // Parsed but unterminated: keep it and add the missing newline on append.
      valid_bytes_ = offset;
      return;
    }
  }
  valid_bytes_ = offset;
}

void EcadDb::write_line(const Json& j) {
  if (std::filesystem::exists(path_)) {
    const auto size = std::filesystem::file_size(path_);
    if (size != valid_bytes_) std::filesystem::resize_file(path_, valid_bytes_);
  }
  std::string text = j.dump();
  // Restore a missing terminator left by an earlier torn write.
  if (valid_bytes_ > 0) {
    std::ifstream check(path_, std::ios::binary);
    check.seekg(static_cast<std::streamoff>(valid_bytes_) - 1);
    if (check.get() != '\n') text.insert(text.begin(), '\n');
  }
  text.push_back('\n');
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw StoreError("cannot append to " + path_.string());
  out << text;
  out.flush();
  if (!out) throw StoreError("write failed: " + path_.string());
  valid_bytes_ += text.size();
}

const IndividualRecord& EcadDb::append(IndividualRecord rec) {
  rec.seq = next_seq_++;
  write_line(to_json(rec));
  individuals_.push_back(std::move(rec));
  return individuals_.back();
}

const GenerationRecord& EcadDb::append(GenerationRecord rec) {
  rec.seq = next_seq_++;
  write_line(to_json(rec));
  generations_.push_back(std::move(rec));
  return generations_.back();
}

const IndividualRecord* EcadDb::find(GenomeId id) const {
  for (auto it = individuals_.rbegin(); it != individuals_.rend(); ++it) {
    if (it->genome.id == id) return &*it;
  }
  return nullptr;
}

std::vector<IndividualRecord> EcadDb::top(std::size_t k) const {
  std::map<GenomeId, const IndividualRecord*> latest;
  for (const auto& r : individuals_) latest[r.genome.id] = &r;
  std::vector<const IndividualRecord*> ranked;
  for (const auto& [id, r] : latest) ranked.push_back(r);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->genome.id < b->genome.id;
  });
  std::vector<IndividualRecord> out;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.push_back(*ranked[i]);
  return out;
}

NetworkDescription EcadDb::export_description(GenomeId id,
                                              const std::filesystem::path& out) const {
  const auto* rec = find(id);
  if (rec == nullptr) throw StoreError("genome " + std::to_string(id) + " not in " + path_.string());
  auto desc = to_description(rec->genome);
  save_description(desc, out);
  return desc;
}

void EcadDb::compact() {
  std::map<GenomeId, std::size_t> latest;
  for (std::size_t i = 0; i < individuals_.size(); ++i) latest[individuals_[i].genome.id] = i;

  std::vector<IndividualRecord> kept_ind;
  for (const auto& [id, idx] : latest) kept_ind.push_back(individuals_[idx]);
  std::sort(kept_ind.begin(), kept_ind.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
  std::vector<GenerationRecord> kept_gen = generations_;

  // Merge both record kinds back into their original order.
  std::uint64_t seq = 0;
  std::size_t i = 0, g = 0;
  const auto tmp = path_.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp);
    while (i < kept_ind.size() || g < kept_gen.size()) {
      const bool take_ind =
          g >= kept_gen.size() || (i < kept_ind.size() && kept_ind[i].seq < kept_gen[g].seq);
      if (take_ind) {
        kept_ind[i].seq = seq++;
        out << to_json(kept_ind[i++]).dump() << '\n';
      } else {
        kept_gen[g].seq = seq++;
        out << to_json(kept_gen[g++]).dump() << '\n';
      }
    }
    out.flush();
    if (!out) throw StoreError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path_);
  individuals_ = std::move(kept_ind);
  generations_ = std::move(kept_gen);
  next_seq_ = seq;
  valid_bytes_ = std::filesystem::file_size(path_);
}

}  // namespace ecad::store
