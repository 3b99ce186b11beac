#include "ocl/imputation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <sstream>

#include "ocl/errors.hpp"
#include "ocl/io.hpp"

namespace ocl {

namespace {

ImputedCohort observed_only(const Cohort& cohort) {
  ImputedCohort out;
  out.cohort = cohort;
  out.provenance.assign(cohort.subjects.size(),
                        std::vector<CellProvenance>(cohort.manifest.num_modalities()));
  return out;
}

}  // namespace

std::string to_string(CellStatus status) {
  switch (status) {
    case CellStatus::kObserved:
      return "observed";
    case CellStatus::kImputed:
      return "imputed";
    case CellStatus::kClassMean:
      return "class_mean";
  }
  return "unknown";
}

std::string ImputedCohort::provenance_csv() const {
  const Manifest& m = cohort.manifest;
  std::string out = "subject_id,modality,status,sources\n";
  for (std::size_t k = 0; k < cohort.subjects.size(); ++k) {
    for (std::size_t t = 0; t < m.num_modalities(); ++t) {
      const auto& cell = provenance[k][t];
      std::string sources;
      for (std::size_t i = 0; i < cell.sources.size(); ++i) {
        if (i > 0) sources += ';';
        sources += m.modalities[cell.sources[i]];
      }
      out += fmt::format("{},{},{},{}\n", cohort.subjects[k].id, m.modalities[t],
                         to_string(cell.status), sources);
    }
  }
  return out;
}

ImputedCohort impute(const Cohort& cohort, const Encoder& encoder, const Decoder& decoder) {
  const std::size_t s_count = cohort.manifest.num_modalities();
  const std::size_t q_count = cohort.manifest.num_rois;
  if (encoder.stats.modalities() != s_count || encoder.input_dim() != q_count ||
      decoder.modalities() != s_count || decoder.output_dim() != q_count) {
    throw DimensionError("models do not match the cohort manifest");
  }
  ImputedCohort out = observed_only(cohort);

  // Observed records of subjects that need imputation, embedded in one pass.
  std::vector<std::size_t> needy;
  std::size_t record_count = 0;
  for (std::size_t k = 0; k < cohort.subjects.size(); ++k) {
    const Subject& s = cohort.subjects[k];
    if (s.observed_count() == 0) {
      throw CoverageError(fmt::format("subject '{}' has no observed modality", s.id));
    }
    if (!s.complete()) {
      needy.push_back(k);
      record_count += s.observed_count();
    }
  }
  if (needy.empty()) return out;

  Matrix inputs(record_count, q_count);
  std::vector<std::size_t> input_modality;
  std::size_t row = 0;
  for (std::size_t k : needy) {
    const Subject& s = cohort.subjects[k];
    for (std::size_t t = 0; t < s_count; ++t) {
      if (!s.features[t]) continue;
      encoder.stats.standardize_into(*s.features[t], t, inputs.row(row++));
      input_modality.push_back(t);
    }
  }
  const Matrix embeddings = encoder.encode(inputs, input_modality);

  Matrix fused(needy.size(), encoder.embedding_dim());
  row = 0;
  for (std::size_t i = 0; i < needy.size(); ++i) {
    const Subject& s = cohort.subjects[needy[i]];
    const std::size_t n = s.observed_count();
    auto dst = fused.row(i);
    for (std::size_t r = 0; r < n; ++r) {
      auto src = embeddings.row(row + r);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
    row += n;
  }
  fused = l2_normalize_rows(fused);

  for (std::size_t target = 0; target < s_count; ++target) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < needy.size(); ++i) {
      if (!cohort.subjects[needy[i]].has(target)) members.push_back(i);
    }
    if (members.empty()) continue;
    Matrix z(members.size(), fused.cols());
    for (std::size_t r = 0; r < members.size(); ++r) {
      auto src = fused.row(members[r]);
      std::copy(src.begin(), src.end(), z.row(r).begin());
    }
    const Matrix decoded = decoder.decode(z, target);
    for (std::size_t r = 0; r < members.size(); ++r) {
      const std::size_t k = needy[members[r]];
      Subject& s = out.cohort.subjects[k];
      s.features[target] = encoder.stats.destandardize(decoded.row(r), target);
      auto& cell = out.provenance[k][target];
      cell.status = CellStatus::kImputed;
      for (std::size_t t = 0; t < s_count; ++t) {
        if (cohort.subjects[k].has(t)) cell.sources.push_back(t);
      }
    }
  }
  return out;
}

ImputedCohort impute(const Cohort& cohort, const Checkpoint& checkpoint) {
  if (checkpoint.manifest_sha != cohort.manifest.fingerprint()) {
    throw FingerprintError(
        fmt::format("checkpoint manifest {} does not match cohort manifest {}",
                    checkpoint.manifest_sha, cohort.manifest.fingerprint()));
  }
  return impute(cohort, checkpoint.encoder, checkpoint.decoder);
}

std::vector<double> impute_from_sources(const Subject& subject,
                                        std::span<const std::size_t> sources,
                                        std::size_t target, const Encoder& encoder,
                                        const Decoder& decoder) {
  if (sources.empty()) throw CoverageError("imputation needs at least one source modality");
  const std::size_t q_count = encoder.input_dim();
  Matrix inputs(sources.size(), q_count);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (!subject.has(sources[i])) {
      throw CoverageError(fmt::format("subject '{}' does not observe source modality {}",
                                      subject.id, sources[i]));
    }
    encoder.stats.standardize_into(*subject.features[sources[i]], sources[i], inputs.row(i));
  }
  const Matrix embeddings = encoder.encode(inputs, sources);
  Matrix fused(1, embeddings.cols());
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    for (std::size_t c = 0; c < embeddings.cols(); ++c) fused(0, c) += embeddings(i, c);
  }
  const Matrix decoded = decoder.decode(l2_normalize_rows(fused), target);
  return encoder.stats.destandardize(decoded.row(0), target);
}

ImputedCohort impute_class_mean(const Cohort& cohort) {
  const std::size_t s_count = cohort.manifest.num_modalities();
  const std::size_t v_count = cohort.manifest.num_labels();
  const std::size_t q_count = cohort.manifest.num_rois;

  // means[label][modality]
  std::vector<std::vector<std::vector<double>>> means(
      v_count, std::vector<std::vector<double>>(s_count, std::vector<double>(q_count, 0.0)));
  std::vector<std::vector<std::size_t>> counts(v_count, std::vector<std::size_t>(s_count, 0));
  for (const auto& s : cohort.subjects) {
    for (std::size_t t = 0; t < s_count; ++t) {
      if (!s.features[t]) continue;
      ++counts[s.label][t];
      for (std::size_t q = 0; q < q_count; ++q) means[s.label][t][q] += (*s.features[t])[q];
    }
  }

  ImputedCohort out = observed_only(cohort);
  for (std::size_t k = 0; k < cohort.subjects.size(); ++k) {
    Subject& s = out.cohort.subjects[k];
    for (std::size_t t = 0; t < s_count; ++t) {
      if (s.features[t]) continue;
      const std::size_t n = counts[s.label][t];
      if (n == 0) {
        throw CoverageError(fmt::format("no observed '{}' features for label '{}'",
                                        cohort.manifest.modalities[t],
                                        cohort.manifest.labels[s.label]));
      }
      std::vector<double> mean = means[s.label][t];
      for (double& v : mean) v /= static_cast<double>(n);
      s.features[t] = std::move(mean);
      out.provenance[k][t].status = CellStatus::kClassMean;
    }
  }
  return out;
}

void save_imputed(const ImputedCohort& imputed, const std::filesystem::path& features_path,
                  const std::filesystem::path& provenance_path) {
  save_cohort(imputed.cohort, features_path);
  write_file(provenance_path, imputed.provenance_csv());
}

ImputedCohort load_imputed(const std::filesystem::path& features_path,
                           const std::filesystem::path& provenance_path,
                           const Manifest& manifest) {
  ImputedCohort out = observed_only(load_cohort(features_path, manifest));
  const std::string text = read_file(provenance_path);
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != "subject_id,modality,status,sources") {
        throw ParseError(fmt::format("{}: unexpected provenance header", provenance_path.string()));
      }
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() == 3) fields.emplace_back();
    if (fields.size() != 4) {
      throw ParseError(fmt::format("{}:{}: expected 4 columns", provenance_path.string(), line_no));
    }
    auto k = out.cohort.find(fields[0]);
    if (!k) {
      throw ParseError(fmt::format("{}:{}: unknown subject '{}'", provenance_path.string(),
                                   line_no, fields[0]));
    }
    const std::size_t t = manifest.modality_index(fields[1]);
    CellProvenance cell;
    if (fields[2] == "observed") {
      cell.status = CellStatus::kObserved;
    } else if (fields[2] == "imputed") {
      cell.status = CellStatus::kImputed;
    } else if (fields[2] == "class_mean") {
      cell.status = CellStatus::kClassMean;
    } else {
      throw ParseError(fmt::format("{}:{}: unknown status '{}'", provenance_path.string(),
                                   line_no, fields[2]));
    }
    std::stringstream src(fields[3]);
    std::string name;
    while (std::getline(src, name, ';')) {
      if (!name.empty()) cell.sources.push_back(manifest.modality_index(name));
    }
    out.provenance[*k][t] = std::move(cell);
  }
  return out;
}

}  // namespace ocl
