#pragma once

#include "airsvr/frame.hpp"

#include <iosfwd>
#include <string>

namespace airsvr {

// embassy: datetime,pm25,pm10[,aqi] hourly. cpcb: date,station_id and any of so2,no2,pm25,pm10,spm daily.
enum class DatasetSchema { EmbassyHourly, CpcbDaily };
std::string schema_name(DatasetSchema s);  // "embassy" | "cpcb"
DatasetSchema parse_schema(const std::string& name);

struct IngestOptions {
    // Empty: average the stations per date. Otherwise keep only this station.
    std::string station;
};

// Returns a frame on a regular cadence grid; absent rows become all-missing.
// Throws SchemaError on a bad header, ParseError (1-based line, column name) on a bad row.
TimeSeriesFrame ingest_csv(std::istream& in, DatasetSchema schema, const IngestOptions& options = {});
TimeSeriesFrame ingest_csv_file(const std::string& path, DatasetSchema schema, const IngestOptions& options = {});

}  // namespace airsvr
