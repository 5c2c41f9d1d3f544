#include "cropemu/cropsim/dataset.hpp"

#include <istream>
#include <ostream>

#include "cropemu/csv.hpp"
#include "cropemu/error.hpp"
#include "cropemu/parallel.hpp"

namespace cropemu::cropsim {
namespace {

std::string latent_name(std::size_t i) {
  return i < kTempRadLatent ? "t" + std::to_string(i) : "r" + std::to_string(i - kTempRadLatent);
}

}  // namespace

std::vector<SimOutputs> run_batch(const std::vector<SimJob>& jobs, const CropConstants& constants) {
  std::vector<SimOutputs> out(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const SimJob& job = jobs[i];
    if (job.weather == nullptr || job.soil == nullptr) throw InputError("job " + std::to_string(i) + " lacks weather or soil");
    out[i] = simulate(job.config, *job.weather, *job.soil, constants);
  });
  return out;
}

std::string weather_key(const weather::WeatherSeries& s) {
  return s.location + "/" + std::to_string(s.year) + "/" + weather::to_string(s.sourceTag);
}

void write_dataset_csv(std::ostream& out, const std::vector<DatasetRow>& rows) {
  csv::Writer w(out);
  w.field("id").field("location").field("lat").field("weather");
  for (auto name : sampling::variable_names()) w.field(name);
  for (std::size_t i = 0; i < kLatentWidth; ++i) w.field(latent_name(i));
  for (auto name : output_names()) w.field(name);
  w.end_row();
  for (const auto& r : rows) {
    w.field(static_cast<std::size_t>(r.id)).field(r.location).field(r.lat).field(r.weatherKey);
    for (std::size_t i = 0; i < sampling::kVariableCount; ++i) w.field(sampling::get_value(r.config, i));
    for (double z : r.latent) w.field(z);
    for (double v : r.outputs.values) w.field(v);
    w.end_row();
  }
}

std::vector<DatasetRow> read_dataset_csv(std::istream& in, const std::string& source) {
  const csv::Table t = csv::read(in, source);
  const std::size_t c_id = t.column("id"), c_loc = t.column("location"), c_lat = t.column("lat"),
                    c_weather = t.column("weather");
  std::array<std::size_t, sampling::kVariableCount> inputs{};
  for (std::size_t i = 0; i < inputs.size(); ++i) inputs[i] = t.column(sampling::variable_names()[i]);
  std::array<std::size_t, kLatentWidth> latents{};
  for (std::size_t i = 0; i < latents.size(); ++i) latents[i] = t.column(latent_name(i));
  std::array<std::size_t, kOutputCount> outputs{};
  for (std::size_t i = 0; i < outputs.size(); ++i) outputs[i] = t.column(output_names()[i]);

  std::vector<DatasetRow> rows(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    DatasetRow& row = rows[r];
    row.id = static_cast<std::uint64_t>(t.integer(r, c_id));
    row.location = t.rows[r][c_loc];
    row.lat = t.number(r, c_lat);
    row.weatherKey = t.rows[r][c_weather];
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (i != sampling::SWCON) sampling::set_value(row.config, i, t.number(r, inputs[i]));
    }
    sampling::apply_derived(row.config);
    for (std::size_t i = 0; i < latents.size(); ++i) row.latent[i] = t.number(r, latents[i]);
    for (std::size_t i = 0; i < outputs.size(); ++i) row.outputs[i] = t.number(r, outputs[i]);
  }
  return rows;
}

}  // namespace cropemu::cropsim
