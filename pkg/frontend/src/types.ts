/** Payload shapes of the sarfields HTTP API. */

export interface CropSeason {
  lpis_name: string;
  english_name: string;
  start: string; // "MM-DD"
  start_year_offset: number;
  end: string;
  end_year_offset: number;
}

export type JobStatus = "pending" | "processing" | "done" | "failed";

export interface StatusView {
  request_id: string;
  status: JobStatus;
  crop: string;
  year: number;
  ratio_mode: string;
  created_at: string;
  message: string | null;
  scene_count: number | null;
  parcel_count: number | null;
  bundle_url?: string;
  timeseries_url?: string;
}

export interface SeriesSample {
  timestamp: string;
  scene_id: string;
  mean_vv_db: number;
  mean_vh_db: number;
  ratio: number;
  pixel_count: number;
  stage: number | null;
}

export interface ParcelSeries {
  parcel_id: string;
  crop_code: string;
  eroded_away: boolean;
  samples: SeriesSample[];
}

export interface TimeSeriesPayload {
  request_id: string;
  ratio_mode: string;
  scene_count: number;
  parcels: ParcelSeries[];
}

export interface SubmitBody {
  geojson: GeoJsonPolygon;
  email: string;
  crop: string;
  year: number;
  ratio_mode?: string;
}

export interface GeoJsonPolygon {
  type: "Polygon";
  coordinates: number[][][];
}

export interface ApiErrorBody {
  error: string;
  message: string;
}
