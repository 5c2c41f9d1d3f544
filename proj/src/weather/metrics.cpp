#include "cropemu/weather/metrics.hpp"

#include <cmath>

#include "cropemu/error.hpp"

namespace cropemu::weather {

VariableMetrics variable_metrics(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("metric inputs differ in length");
  VariableMetrics m;
  m.count = a.size();
  if (a.empty()) return m;
  const double n = static_cast<double>(a.size());
  double meanA = 0, meanB = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    meanA += a[i] / n;
    meanB += b[i] / n;
  }
  double sse = 0, sae = 0, sum = 0, sst = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = b[i] - a[i];
    sse += e * e;
    sae += std::abs(e);
    sum += e;
    sst += (a[i] - meanA) * (a[i] - meanA);
    sbb += (b[i] - meanB) * (b[i] - meanB);
    sab += (a[i] - meanA) * (b[i] - meanB);
  }
  m.rmse = std::sqrt(sse / n);
  m.mae = sae / n;
  m.bias = sum / n;
  if (sst > 0) m.r2 = 1.0 - sse / sst;
  if (sst > 0 && sbb > 0) m.corr = sab / std::sqrt(sst * sbb);
  return m;
}

double f1_score(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

OccurrenceMetrics occurrence_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  OccurrenceMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  const std::size_t total = tp + fp + fn + tn;
  m.accuracy = total > 0 ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision && m.recall && *m.precision + *m.recall > 0) m.f1 = f1_score(*m.precision, *m.recall);
  return m;
}

ReconMetrics reconstruction_metrics(const std::vector<WeatherSeries>& original,
                                    const std::vector<WeatherSeries>& reconstructed) {
  if (original.size() != reconstructed.size()) throw InputError("reconstruction metrics need paired series");
  std::vector<double> ra, rb, xa, xb, na, nb, wa, wb;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t s = 0; s < original.size(); ++s) {
    const auto& o = original[s].days;
    const auto& r = reconstructed[s].days;
    if (o.size() != r.size()) throw InputError("reconstruction metrics need equal-length series");
    for (std::size_t d = 0; d < o.size(); ++d) {
      ra.push_back(o[d].radn);
      rb.push_back(r[d].radn);
      xa.push_back(o[d].maxT);
      xb.push_back(r[d].maxT);
      na.push_back(o[d].minT);
      nb.push_back(r[d].minT);
      const bool wetO = o[d].rain > 0, wetR = r[d].rain > 0;
      if (wetO) {
        wa.push_back(o[d].rain);
        wb.push_back(r[d].rain);
      }
      tp += wetO && wetR;
      fp += !wetO && wetR;
      fn += wetO && !wetR;
      tn += !wetO && !wetR;
    }
  }
  ReconMetrics m;
  m.radn = variable_metrics(ra, rb);
  m.maxT = variable_metrics(xa, xb);
  m.minT = variable_metrics(na, nb);
  m.rain = variable_metrics(wa, wb);
  m.occurrence = occurrence_metrics(tp, fp, fn, tn);
  return m;
}

}  // namespace cropemu::weather
