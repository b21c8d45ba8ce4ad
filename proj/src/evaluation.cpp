// Copyright 2026 The dpasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dpasr/evaluation.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dpasr/binary_io.hpp"
#include "dpasr/error.hpp"
#include "dpasr/kernels.hpp"
#include "dpasr/scoring.hpp"

namespace dpasr {

using nlohmann::json;

double EvaluateCheckpoint(Checkpoint &ck, const Corpus &corpus, Split split,
                          std::vector<TokenSequence> *hyps) {
  const auto &utts = corpus.Get(split);
  DPASR_REQUIRE(!utts.empty(), std::string("EvaluateCheckpoint: split '") + SplitName(split) +
                                   "' is empty");
  const MelFilterbank bank = ck.config.MakeFilterbank();
  const auto prepared = PrepareUtterances(utts, ck.config.features, bank);
  return EvaluateTer(ck.model, prepared, bank, ck.config.max_decode_len, hyps);
}

// ---------------------------------------------------------------------------
// Ablation

void AblationSpec::Validate() const {
  DPASR_REQUIRE(!variants.empty(), "AblationSpec: no variants");
  DPASR_REQUIRE(!seeds.empty(), "AblationSpec: no seeds");
  std::set<std::string> names;
  for (const auto &v : variants) {
    DPASR_REQUIRE(!v.name.empty(), "AblationSpec: variant without a name");
    DPASR_REQUIRE(names.insert(v.name).second, "AblationSpec: duplicate variant '" + v.name + "'");
  }
  DPASR_REQUIRE(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(),
                "AblationSpec: duplicate seeds");
  for (const auto &v : variants) VariantConfig(*this, v, seeds.front()).Validate();
}

AblationSpec ParseAblationSpec(const json &j) {
  AblationSpec spec;
  spec.base = DeskConfig();
  if (j.contains("base")) from_json(j.at("base"), spec.base);
  spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  for (const json &v : j.at("variants")) {
    AblationVariant av;
    av.name = v.at("name").get<std::string>();
    if (v.contains("dual_path")) av.dual_path = v["dual_path"].get<bool>();
    if (v.contains("use_sl")) av.use_sl = v["use_sl"].get<bool>();
    if (v.contains("use_cl")) av.use_cl = v["use_cl"].get<bool>();
    if (v.contains("layers")) av.layers = v["layers"].get<std::string>();
    spec.variants.push_back(av);
  }
  spec.Validate();
  return spec;
}

AblationSpec LoadAblationSpec(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open ablation spec " + path.string());
  try {
    return ParseAblationSpec(json::parse(in));
  } catch (const json::exception &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

TrainingConfig VariantConfig(const AblationSpec &spec, const AblationVariant &v,
                             std::uint64_t seed) {
  TrainingConfig c = spec.base;
  c.dual_path = v.dual_path;
  c.use_sl = v.dual_path && v.use_sl;
  c.use_cl = v.dual_path && v.use_cl;
  c.sl_layers = v.layers;
  c.seed = seed;
  return c;
}

std::vector<AblationRow> SummarizeAblation(const AblationSpec &spec,
                                           const std::vector<AblationCell> &cells) {
  auto lookup = [&](const std::string &variant, std::uint64_t seed) -> std::optional<double> {
    for (const auto &c : cells)
      if (c.variant == variant && c.seed == seed) return c.test_ter;
    return std::nullopt;
  };
  std::vector<AblationRow> rows;
  for (const auto &v : spec.variants) {
    AblationRow row;
    row.variant = v.name;
    std::vector<double> ters;
    for (std::uint64_t seed : spec.seeds) {
      const auto ter = lookup(v.name, seed);
      if (!ter) {
        ++row.failed;
        continue;
      }
      ters.push_back(*ter);
      const auto ref = lookup(spec.variants.front().name, seed);
      if (ref) {
        if (*ter < *ref) ++row.better;
        else if (*ter > *ref) ++row.worse;
        else ++row.tied;
      }
    }
    row.runs = static_cast<int>(ters.size());
    if (!ters.empty()) {
      double s = 0.0;
      for (double t : ters) s += t;
      row.mean = s / static_cast<double>(ters.size());
      if (ters.size() > 1) {
        double ss = 0.0;
        for (double t : ters) ss += (t - row.mean) * (t - row.mean);
        row.stddev = std::sqrt(ss / static_cast<double>(ters.size() - 1));
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::string RenderAblationTable(const AblationSpec &spec, const std::vector<AblationRow> &rows) {
  std::size_t name_w = 7;
  for (const auto &v : spec.variants) name_w = std::max(name_w, v.name.size());
  char buf[256];
  std::ostringstream os;
  std::snprintf(buf, sizeof buf, "%-*s  %-9s  %-6s  %-6s  %-14s  %-17s  %s\n",
                static_cast<int>(name_w), "Variant", "Dual-path", "Use SL", "Use CL",
                "Encoder Layers", "Test TER (%)", "vs ref (+/=/-)");
  os << buf;
  os << std::string(name_w + 2 + 9 + 2 + 6 + 2 + 6 + 2 + 14 + 2 + 17 + 2 + 14, '-') << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AblationVariant &v = spec.variants[i];
    const AblationRow &r = rows[i];
    const bool sl = v.dual_path && v.use_sl;
    std::string ter = "failed";
    if (r.runs > 0) {
      std::snprintf(buf, sizeof buf, "%.1f +- %.1f", 100.0 * r.mean, 100.0 * r.stddev);
      ter = buf;
      if (r.failed > 0) ter += " (" + std::to_string(r.failed) + " failed)";
    }
    std::string sign = i == 0 ? "ref" : std::to_string(r.better) + "/" + std::to_string(r.tied) +
                                            "/" + std::to_string(r.worse);
    std::snprintf(buf, sizeof buf, "%-*s  %-9s  %-6s  %-6s  %-14s  %-17s  %s\n",
                  static_cast<int>(name_w), v.name.c_str(), v.dual_path ? "yes" : "no",
                  sl ? "yes" : "no", v.dual_path && v.use_cl ? "yes" : "no",
                  sl ? v.layers.c_str() : "-", ter.c_str(), sign.c_str());
    os << buf;
  }
  os << "seeds:";
  for (auto s : spec.seeds) os << ' ' << s;
  os << '\n';
  return os.str();
}

AblationResult RunAblation(const AblationSpec &spec, const Corpus &corpus,
                           const std::filesystem::path &out_dir, std::ostream *progress) {
  spec.Validate();
  DPASR_REQUIRE(!corpus.test.empty(), "RunAblation: corpus has no test split");
  std::filesystem::create_directories(out_dir);
  AblationResult result;
  std::ofstream results(out_dir / "results.jsonl");
  for (const auto &v : spec.variants) {
    for (std::uint64_t seed : spec.seeds) {
      AblationCell cell{v.name, seed, std::nullopt, "", 0.0};
      const auto t0 = std::chrono::steady_clock::now();
      const auto run_dir = out_dir / v.name / ("seed-" + std::to_string(seed));
      try {
        const TrainingConfig config = VariantConfig(spec, v, seed);
        const TrainingResult tr = RunTraining(config, corpus, run_dir);
        Checkpoint ck = LoadCheckpoint(tr.checkpoint);
        cell.test_ter = EvaluateCheckpoint(ck, corpus, Split::kTest);
      } catch (const std::exception &e) {
        cell.error = e.what();
      }
      cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      json rec = {{"variant", cell.variant}, {"seed", cell.seed}, {"seconds", cell.seconds}};
      rec["test_ter"] = cell.test_ter ? json(*cell.test_ter) : json(nullptr);
      if (!cell.test_ter) {
        rec["failed"] = true;
        rec["error"] = cell.error;
      }
      results << rec.dump() << '\n';
      results.flush();
      if (progress) {
        *progress << v.name << " seed " << seed << ": ";
        if (cell.test_ter) *progress << "test_ter " << *cell.test_ter;
        else *progress << "FAILED " << cell.error;
        *progress << std::endl;
      }
      result.cells.push_back(cell);
    }
  }
  result.rows = SummarizeAblation(spec, result.cells);
  result.table = RenderAblationTable(spec, result.rows);
  std::ofstream(out_dir / "table.txt") << result.table;
  return result;
}

// ---------------------------------------------------------------------------
// Embedding dumps

const Matrix *EmbeddingDump::Find(const std::string &label) const {
  for (const auto &a : arrays)
    if (a.label == label) return &a.values;
  return nullptr;
}

EmbeddingDump DumpEmbeddings(Checkpoint &ck, const Utterance &utt, const LayerSelection &layers) {
  const int num_layers = static_cast<int>(ck.config.model.asr.enc_layers);
  layers.Validate(num_layers);
  const MelFilterbank bank = ck.config.MakeFilterbank();
  const auto prepared = PrepareUtterances({utt}, ck.config.features, bank);
  ForwardOptions options;
  options.dual_path = true;
  options.use_sl = false;
  options.use_cl = false;
  Tape tape(false);
  const SystemForward f = ForwardSystem(tape, ck.model, prepared.front(), options, bank);
  EmbeddingDump dump;
  dump.utterance_id = utt.id;
  for (int l : layers.layers()) {
    const std::string suffix = ".L" + std::to_string(l);
    dump.arrays.push_back({"encoder.clean" + suffix, f.clean.layers[l - 1].value()});
    dump.arrays.push_back({"encoder.fused" + suffix, f.fused.layers[l - 1].value()});
  }
  dump.arrays.push_back({"decoder.clean", f.clean.posterior.value()});
  dump.arrays.push_back({"decoder.fused", f.fused.posterior.value()});
  for (const auto &a : dump.arrays)
    if (!a.values.AllFinite()) throw NonFiniteLoss("DumpEmbeddings: non-finite " + a.label);
  return dump;
}

EmbeddingDump DumpEmbeddings(Checkpoint &ck, const Corpus &corpus, const std::string &utt_id,
                             const LayerSelection &layers) {
  const Utterance *utt = corpus.Find(utt_id);
  if (!utt) throw InvalidInput("unknown utterance '" + utt_id + "'");
  return DumpEmbeddings(ck, *utt, layers);
}

namespace {
constexpr std::uint32_t kDumpVersion = 1;
}

void WriteEmbeddingDump(const std::filesystem::path &path, const EmbeddingDump &dump) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot write " + path.string());
  os.write("DPEM", 4);
  io::WritePod(os, kDumpVersion);
  io::WriteString(os, dump.utterance_id);
  io::WritePod<std::uint32_t>(os, static_cast<std::uint32_t>(dump.arrays.size()));
  for (const auto &a : dump.arrays) {
    io::WriteString(os, a.label);
    io::WritePod<std::uint64_t>(os, a.values.rows());
    io::WritePod<std::uint64_t>(os, a.values.cols());
    io::WriteArray(os, a.values.data(), a.values.size());
  }
  if (!os) throw InvalidInput("failed writing " + path.string());
}

EmbeddingDump ReadEmbeddingDump(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot open " + path.string());
  io::ExpectMagic(is, "DPEM", path.string());
  if (io::ReadPod<std::uint32_t>(is) != kDumpVersion)
    throw ParseError(path.string() + ": unsupported dump version");
  EmbeddingDump dump;
  dump.utterance_id = io::ReadString(is);
  const auto n = io::ReadPod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    LabeledArray a;
    a.label = io::ReadString(is);
    const auto rows = io::ReadPod<std::uint64_t>(is);
    const auto cols = io::ReadPod<std::uint64_t>(is);
    if (rows * cols > (std::uint64_t{1} << 28))
      throw ParseError(path.string() + ": implausible array shape for " + a.label);
    a.values = Matrix(rows, cols);
    const auto v = io::ReadArray<double>(is, a.values.size());
    std::copy(v.begin(), v.end(), a.values.data());
    dump.arrays.push_back(std::move(a));
  }
  return dump;
}

double StyleDistance(const EmbeddingDump &dump, int layer) {
  const std::string suffix = ".L" + std::to_string(layer);
  const Matrix *c = dump.Find("encoder.clean" + suffix);
  const Matrix *f = dump.Find("encoder.fused" + suffix);
  DPASR_REQUIRE(c && f, "StyleDistance: dump has no arrays for layer " + std::to_string(layer));
  Matrix diff = kernels::Gram(*c);
  diff.AddScaled(kernels::Gram(*f), -1.0);
  return std::sqrt(diff.SquaredNorm());
}

// ---------------------------------------------------------------------------
// Plots

namespace {

constexpr std::array<const char *, 6> kLossKeys = {"loss_enh", "loss_asr_c", "loss_asr_f",
                                                   "loss_sl",  "loss_cl",    "loss_total"};

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string SvgHeader(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string SafeName(std::string s) {
  for (char &c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

std::filesystem::path WriteFile(const std::filesystem::path &p, const std::string &text) {
  std::ofstream os(p);
  if (!os) throw InvalidInput("cannot write " + p.string());
  os << text;
  return p;
}

std::string LineChart(const std::string &title, const std::vector<double> &x,
                      const std::vector<double> &y) {
  const int w = 640, h = 400, left = 70, right = 20, top = 40, bottom = 50;
  double x0 = x.front(), x1 = x.back(), y0 = *std::min_element(y.begin(), y.end()),
         y1 = *std::max_element(y.begin(), y.end());
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * (w - left - right); };
  auto py = [&](double v) { return h - bottom - (v - y0) / (y1 - y0) * (h - top - bottom); };
  std::ostringstream os;
  os << SvgHeader(w, h);
  os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\">" << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\""
     << h - bottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
     << h - bottom << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << Fmt(y1)
     << "</text>\n";
  os << "<text x=\"" << left - 6 << "\" y=\"" << h - bottom << "\" text-anchor=\"end\">"
     << Fmt(y0) << "</text>\n";
  os << "<text x=\"" << left << "\" y=\"" << h - bottom + 18 << "\">" << Fmt(x0) << "</text>\n";
  os << "<text x=\"" << w - right << "\" y=\"" << h - bottom + 18 << "\" text-anchor=\"end\">"
     << Fmt(x1) << "</text>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">step</text>\n";
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) os << Fmt(px(x[i])) << ',' << Fmt(py(y[i])) << ' ';
  os << "\"/>\n</svg>\n";
  return os.str();
}

// Five-stop approximation of the viridis colormap.
std::string Color(double t) {
  static const double stops[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(t));
  const double f = t - i;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(stops[i][0] + f * (stops[i + 1][0] - stops[i][0])),
                static_cast<int>(stops[i][1] + f * (stops[i + 1][1] - stops[i][1])),
                static_cast<int>(stops[i][2] + f * (stops[i + 1][2] - stops[i][2])));
  return buf;
}

std::string HeatMap(const std::string &title, const Matrix &m) {
  // Time runs along x, channels along y.
  const int cell = std::clamp(600 / static_cast<int>(std::max<std::size_t>(m.rows(), 1)), 3, 16);
  const int left = 50, top = 40;
  const int w = left + cell * static_cast<int>(m.rows()) + 20;
  const int h = top + cell * static_cast<int>(m.cols()) + 40;
  double lo = m.empty() ? 0.0 : m[0], hi = lo;
  for (double v : m.values()) lo = std::min(lo, v), hi = std::max(hi, v);
  const double span = hi > lo ? hi - lo : 1.0;
  std::ostringstream os;
  os << SvgHeader(std::max(w, 320), h);
  os << "<text x=\"" << left << "\" y=\"24\">" << title << " (" << m.rows() << " x " << m.cols()
     << ", range " << Fmt(lo) << " .. " << Fmt(hi) << ")</text>\n";
  for (std::size_t t = 0; t < m.rows(); ++t)
    for (std::size_t d = 0; d < m.cols(); ++d)
      os << "<rect x=\"" << left + cell * static_cast<int>(t) << "\" y=\""
         << top + cell * static_cast<int>(d) << "\" width=\"" << cell << "\" height=\"" << cell
         << "\" fill=\"" << Color((m(t, d) - lo) / span) << "\"/>\n";
  os << "</svg>\n";
  return os.str();
}

std::string BarChart(const std::vector<std::string> &names, const std::vector<double> &mean,
                     const std::vector<double> &sd) {
  const int bar = 60, gap = 40, left = 70, top = 40, plot_h = 300;
  const int w = left + static_cast<int>(names.size()) * (bar + gap) + gap;
  const int h = top + plot_h + 60;
  double hi = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) hi = std::max(hi, mean[i] + sd[i]);
  if (hi <= 0.0) hi = 1.0;
  auto py = [&](double v) { return top + plot_h - v / hi * plot_h; };
  std::ostringstream os;
  os << SvgHeader(std::max(w, 320), h);
  os << "<text x=\"" << left << "\" y=\"24\">test TER (mean +- std over seeds)</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << w << "\" y2=\""
     << top + plot_h << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << Fmt(hi)
     << "</text>\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    const int x = left + gap + static_cast<int>(i) * (bar + gap);
    os << "<rect x=\"" << x << "\" y=\"" << Fmt(py(mean[i])) << "\" width=\"" << bar
       << "\" height=\"" << Fmt(top + plot_h - py(mean[i])) << "\" fill=\"#4c78a8\"/>\n";
    os << "<line x1=\"" << x + bar / 2 << "\" y1=\"" << Fmt(py(mean[i] + sd[i])) << "\" x2=\""
       << x + bar / 2 << "\" y2=\"" << Fmt(py(std::max(0.0, mean[i] - sd[i])))
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x + bar / 2 << "\" y=\"" << top + plot_h + 18
       << "\" text-anchor=\"middle\">" << names[i] << "</text>\n";
    os << "<text x=\"" << x + bar / 2 << "\" y=\"" << Fmt(py(mean[i]) - 4)
       << "\" text-anchor=\"middle\">" << Fmt(mean[i]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

struct JsonLine {
  int line;
  json value;
};

std::vector<JsonLine> ReadJsonLines(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::vector<JsonLine> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      if (!j.is_object()) throw ParseError("not an object");
      out.push_back({n, std::move(j)});
    } catch (const std::exception &e) {
      throw ParseError(path.string() + ":" + std::to_string(n) + ": malformed record: " +
                       e.what());
    }
  }
  return out;
}

double NumberAt(const json &j, const char *key, const std::filesystem::path &path, int line) {
  if (!j.contains(key) || !j[key].is_number())
    throw ParseError(path.string() + ":" + std::to_string(line) + ": missing numeric field '" +
                     key + "'");
  return j[key].get<double>();
}

bool IsDumpFile(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  char buf[4] = {};
  in.read(buf, 4);
  return in && std::string(buf, 4) == "DPEM";
}

}  // namespace

std::vector<std::filesystem::path> RenderPlots(const std::filesystem::path &in,
                                               const std::filesystem::path &out_dir,
                                               std::ostream *warnings) {
  std::vector<std::filesystem::path> written;
  if (IsDumpFile(in)) {
    const EmbeddingDump dump = ReadEmbeddingDump(in);
    std::filesystem::create_directories(out_dir);
    for (const auto &a : dump.arrays)
      written.push_back(WriteFile(out_dir / ("heatmap_" + SafeName(a.label) + ".svg"),
                                  HeatMap(dump.utterance_id + " " + a.label, a.values)));
    return written;
  }
  const auto records = ReadJsonLines(in);
  if (records.empty()) {
    if (warnings) *warnings << "warning: " << in.string() << " has no records, nothing plotted\n";
    return written;
  }
  std::filesystem::create_directories(out_dir);
  if (records.front().value.contains("test_ter")) {
    std::vector<std::string> names;
    std::vector<std::vector<double>> ters;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const json &r = records[i].value;
      if (!r.contains("variant") || !r["variant"].is_string())
        throw ParseError(in.string() + ":" + std::to_string(records[i].line) +
                         ": missing 'variant'");
      const std::string name = r["variant"].get<std::string>();
      auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) {
        names.push_back(name);
        ters.emplace_back();
        it = names.end() - 1;
      }
      if (r.contains("test_ter") && r["test_ter"].is_number())
        ters[it - names.begin()].push_back(r["test_ter"].get<double>());
    }
    std::vector<double> mean(names.size(), 0.0), sd(names.size(), 0.0);
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto &t = ters[i];
      if (t.empty()) continue;
      for (double v : t) mean[i] += v;
      mean[i] /= static_cast<double>(t.size());
      if (t.size() > 1) {
        for (double v : t) sd[i] += (v - mean[i]) * (v - mean[i]);
        sd[i] = std::sqrt(sd[i] / static_cast<double>(t.size() - 1));
      }
    }
    written.push_back(WriteFile(out_dir / "ablation.svg", BarChart(names, mean, sd)));
    return written;
  }
  std::vector<double> steps;
  std::vector<std::vector<double>> curves(kLossKeys.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto &[line, r] = records[i];
    steps.push_back(NumberAt(r, "step", in, line));
    for (std::size_t k = 0; k < kLossKeys.size(); ++k)
      curves[k].push_back(NumberAt(r, kLossKeys[k], in, line));
  }
  for (std::size_t k = 0; k < kLossKeys.size(); ++k)
    written.push_back(WriteFile(out_dir / (std::string(kLossKeys[k]) + ".svg"),
                                LineChart(kLossKeys[k], steps, curves[k])));
  return written;
}

}  // namespace dpasr
