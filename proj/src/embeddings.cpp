#include "ocl/embeddings.hpp"

#include <fmt/format.h>

#include <numeric>

#include "ocl/io.hpp"

namespace ocl {

EmbeddedRecords embed_cohort(const Cohort& cohort, const Encoder& encoder) {
  std::vector<std::size_t> all(cohort.subjects.size());
  std::iota(all.begin(), all.end(), 0);
  EmbeddedRecords out;
  out.records = build_records(cohort, all, encoder.stats);
  out.embeddings = encoder.encode(out.records.features, out.records.modality);
  return out;
}

std::string embeddings_csv(const Cohort& cohort, const Encoder& encoder) {
  const EmbeddedRecords e = embed_cohort(cohort, encoder);
  const Manifest& m = cohort.manifest;
  std::string out = "subject_id,modality,label";
  for (std::size_t c = 0; c < e.embeddings.cols(); ++c) out += fmt::format(",z_{}", c);
  out += '\n';
  for (std::size_t r = 0; r < e.embeddings.rows(); ++r) {
    const Subject& s = cohort.subjects[e.records.subject_index[r]];
    out += fmt::format("{},{},{}", s.id, m.modalities[e.records.modality[r]], m.labels[s.label]);
    for (double v : e.embeddings.row(r)) {
      out += ',';
      out += format_number(v);
    }
    out += '\n';
  }
  return out;
}

void export_embeddings(const Cohort& cohort, const Encoder& encoder,
                       const std::filesystem::path& path) {
  write_file(path, embeddings_csv(cohort, encoder));
}

}  // namespace ocl
