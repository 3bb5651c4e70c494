#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ecad/fitness.hpp"
#include "ecad/genome.hpp"
#include "ecad/network.hpp"

namespace ecad::store {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// `seq` is a logical timestamp: the record's position in the file.
struct IndividualRecord {
  std::uint64_t seq = 0;
  int generation = 0;
  NetworkGenome genome;
  ScoreCard card;
  double score = 0.0;

  bool operator==(const IndividualRecord&) const = default;
};

struct GenerationRecord {
  std::uint64_t seq = 0;
  int generation = 0;
  double best_score = 0.0;
  double mean_score = 0.0;
  GenomeId best_id = 0;
  std::int64_t population = 0;
  std::int64_t evaluated = 0;

  bool operator==(const GenerationRecord&) const = default;
};

Json to_json(const IndividualRecord& r);
Json to_json(const GenerationRecord& r);

// Append-only JSON-lines database (ecad.db.jsonl). One writer at a time.
class EcadDb {
 public:
  // Opens or creates the file and loads existing records. A truncated last
  // line (interrupted write) is ignored and cut off on the next append.
  explicit EcadDb(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }

  // Assigns seq and writes one line, flushed before returning.
  const IndividualRecord& append(IndividualRecord rec);
  const GenerationRecord& append(GenerationRecord rec);

  const std::vector<IndividualRecord>& individuals() const { return individuals_; }
  const std::vector<GenerationRecord>& generations() const { return generations_; }

  // Latest record for the genome, if any.
  const IndividualRecord* find(GenomeId id) const;
  // Latest record per genome, by score descending, older genome first on ties.
  std::vector<IndividualRecord> top(std::size_t k) const;

  // Writes the genome's NetworkDescription JSON. Throws StoreError for an unknown id.
  NetworkDescription export_description(GenomeId id, const std::filesystem::path& out) const;

  // Rewrites the file keeping the latest record per genome plus every
  // generation record, renumbering seq. Atomic via rename.
  void compact();

 private:
  void load();
  void write_line(const Json& j);

  std::filesystem::path path_;
  std::vector<IndividualRecord> individuals_;
  std::vector<GenerationRecord> generations_;
  std::uint64_t next_seq_ = 0;
  std::uintmax_t valid_bytes_ = 0;
};

}  // namespace ecad::store
