//! The rating-prediction task: three agents hold disjoint slices of a
//! movie-rating dataset and collaborate to predict one user's rating.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BodyError, Environment, EnvironmentId, ProposalBody};
use crate::engine::{Roster, Transcript};

/// Fallback prediction used when no rating has been accepted yet.
pub const ALWAYS_GUESS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserInfo {
    pub user_id: u32,
    pub age: u32,
    pub gender: String,
    pub occupation: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieInfo {
    pub movie_id: u32,
    pub movie_title: String,
    pub release_date: u32,
    pub genre: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserHistoryRow {
    pub movie_id: u32,
    pub movie_title: String,
    pub genre: Vec<String>,
    pub release_date: u32,
    pub rating: u8,
    pub rated_date: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovieHistoryRow {
    pub user_id: u32,
    pub user_pref_similarity: f64,
    pub personal_average_score: f64,
    pub age: u32,
    pub gender: String,
    pub occupation: String,
    pub state: String,
    pub rated_date: u32,
    pub rating: u8,
}

/// One rating-prediction example with its three-way information split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTask {
    pub example_id: u32,
    pub user: UserInfo,
    pub movie: MovieInfo,
    pub user_history: Vec<UserHistoryRow>,
    pub movie_history: Vec<MovieHistoryRow>,
    pub gold_rating: u8,
}

/// Paths of the five delimited table files.
#[derive(Debug, Clone)]
pub struct TablePaths {
    pub basic_info_user: PathBuf,
    pub basic_info_movie: PathBuf,
    pub user_history: PathBuf,
    pub movie_history: PathBuf,
    pub gold: PathBuf,
}

impl TablePaths {
    pub fn in_dir(dir: &Path) -> Self {
        TablePaths {
            basic_info_user: dir.join("basic_info_user.csv"),
            basic_info_movie: dir.join("basic_info_movie.csv"),
            user_history: dir.join("user_history.csv"),
            movie_history: dir.join("movie_history.csv"),
            gold: dir.join("gold.csv"),
        }
    }
}

/// Ingestion failure naming the file, line, and column.
#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{file}:{line}: column `{column}`: {message}")]
    Cell {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("example {example}: missing {what}")]
    MissingPart { example: u32, what: &'static str },
}

struct TableReader {
    file: String,
    headers: Vec<String>,
    records: Vec<(u64, csv::StringRecord)>,
}

impl TableReader {
    fn open(path: &Path) -> Result<Self, IngestError> {
        let file = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|source| IngestError::Io {
                file: file.clone(),
                source,
            })?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|source| IngestError::Io {
                file: file.clone(),
                source,
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut records = Vec::new();
        for result in reader.records() {
            let record = result.map_err(|source| IngestError::Io {
                file: file.clone(),
                source,
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            records.push((line, record));
        }
        Ok(TableReader {
            file,
            headers,
            records,
        })
    }

    fn column(&self, name: &str) -> Result<usize, IngestError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn {
                file: self.file.clone(),
                column: name.to_string(),
            })
    }

    fn cell<'a>(
        &self,
        record: &'a csv::StringRecord,
        line: u64,
        index: usize,
        name: &str,
    ) -> Result<&'a str, IngestError> {
        record.get(index).ok_or_else(|| IngestError::Cell {
            file: self.file.clone(),
            line,
            column: name.to_string(),
            message: "missing value".to_string(),
        })
    }

    fn cell_error(&self, line: u64, column: &str, message: impl Into<String>) -> IngestError {
        IngestError::Cell {
            file: self.file.clone(),
            line,
            column: column.to_string(),
            message: message.into(),
        }
    }
}

fn parse_rating(reader: &TableReader, line: u64, column: &str, raw: &str) -> Result<u8, IngestError> {
    let value: i64 = raw
        .parse()
        .map_err(|_| reader.cell_error(line, column, format!("`{raw}` is not an integer")))?;
    if !(1..=5).contains(&value) {
        return Err(reader.cell_error(line, column, format!("rating {value} outside [1, 5]")));
    }
    Ok(value as u8)
}

fn parse_date(reader: &TableReader, line: u64, column: &str, raw: &str) -> Result<u32, IngestError> {
    let value: u32 = raw
        .parse()
        .map_err(|_| reader.cell_error(line, column, format!("`{raw}` is not an integer")))?;
    let month = (value / 100) % 100;
    let day = value % 100;
    if !(10_000_000..=99_999_999).contains(&value) || !(1..=12).contains(&month) || !(1..=31).contains(&day)
    {
        return Err(reader.cell_error(
            line,
            column,
            format!("`{value}` is not an 8-digit YYYYMMDD date"),
        ));
    }
    Ok(value)
}

fn parse_int(reader: &TableReader, line: u64, column: &str, raw: &str) -> Result<u32, IngestError> {
    raw.parse()
        .map_err(|_| reader.cell_error(line, column, format!("`{raw}` is not an integer")))
}

fn parse_float(reader: &TableReader, line: u64, column: &str, raw: &str) -> Result<f64, IngestError> {
    raw.parse()
        .map_err(|_| reader.cell_error(line, column, format!("`{raw}` is not a number")))
}

/// Parses a bracketed genre list like `['Action', "Children's", 'Comedy']`.
fn parse_genres(reader: &TableReader, line: u64, column: &str, raw: &str) -> Result<Vec<String>, IngestError> {
    let trimmed = raw.trim();
    let inner = trimmed
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| reader.cell_error(line, column, format!("`{raw}` is not a bracketed list")))?;
    let mut genres = Vec::new();
    for item in split_list_items(inner) {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let unquoted = item
            .strip_prefix('\'')
            .and_then(|s| s.strip_suffix('\''))
            .or_else(|| item.strip_prefix('"').and_then(|s| s.strip_suffix('"')))
            .unwrap_or(item);
        genres.push(unquoted.to_string());
    }
    Ok(genres)
}

/// Splits on commas outside quotes, so `"Children's"` survives intact.
fn split_list_items(inner: &str) -> Vec<String> {
    let mut items = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    for c in inner.chars() {
        match quote {
            Some(q) => {
                current.push(c);
                if c == q {
                    quote = None;
                }
            }
            None => match c {
                '\'' | '"' => {
                    current.push(c);
                    quote = Some(c);
                }
                ',' => {
                    items.push(std::mem::take(&mut current));
                }
                _ => current.push(c),
            },
        }
    }
    if !current.trim().is_empty() {
        items.push(current);
    }
    items
}

/// Reads the five table files and assembles one [`RatingTask`] per example.
pub fn ingest_tables(paths: &TablePaths) -> Result<Vec<RatingTask>, IngestError> {
    let mut users: BTreeMap<u32, UserInfo> = BTreeMap::new();
    let reader = TableReader::open(&paths.basic_info_user)?;
    let (c_ex, c_uid) = (reader.column("example_id")?, reader.column("user_id")?);
    let (c_age, c_gender) = (reader.column("age")?, reader.column("gender")?);
    let (c_occ, c_state) = (reader.column("occupation")?, reader.column("state")?);
    for (line, record) in &reader.records {
        let example = parse_int(&reader, *line, "example_id", reader.cell(record, *line, c_ex, "example_id")?)?;
        users.insert(
            example,
            UserInfo {
                user_id: parse_int(&reader, *line, "user_id", reader.cell(record, *line, c_uid, "user_id")?)?,
                age: parse_int(&reader, *line, "age", reader.cell(record, *line, c_age, "age")?)?,
                gender: reader.cell(record, *line, c_gender, "gender")?.to_string(),
                occupation: reader.cell(record, *line, c_occ, "occupation")?.to_string(),
                state: reader.cell(record, *line, c_state, "state")?.to_string(),
            },
        );
    }

    let mut movies: BTreeMap<u32, MovieInfo> = BTreeMap::new();
    let reader = TableReader::open(&paths.basic_info_movie)?;
    let (c_ex, c_mid) = (reader.column("example_id")?, reader.column("movie_id")?);
    let (c_title, c_rel, c_genre) = (
        reader.column("movie_title")?,
        reader.column("release_date")?,
        reader.column("genre")?,
    );
    for (line, record) in &reader.records {
        let example = parse_int(&reader, *line, "example_id", reader.cell(record, *line, c_ex, "example_id")?)?;
        movies.insert(
            example,
            MovieInfo {
                movie_id: parse_int(&reader, *line, "movie_id", reader.cell(record, *line, c_mid, "movie_id")?)?,
                movie_title: reader.cell(record, *line, c_title, "movie_title")?.to_string(),
                release_date: parse_date(&reader, *line, "release_date", reader.cell(record, *line, c_rel, "release_date")?)?,
                genre: parse_genres(&reader, *line, "genre", reader.cell(record, *line, c_genre, "genre")?)?,
            },
        );
    }

    let mut user_histories: BTreeMap<u32, Vec<UserHistoryRow>> = BTreeMap::new();
    let reader = TableReader::open(&paths.user_history)?;
    let c_ex = reader.column("example_id")?;
    let (c_mid, c_title, c_genre) = (
        reader.column("movie_id")?,
        reader.column("movie_title")?,
        reader.column("genre")?,
    );
    let (c_rel, c_rating, c_rated) = (
        reader.column("release_date")?,
        reader.column("rating")?,
        reader.column("rated_date")?,
    );
    for (line, record) in &reader.records {
        let example = parse_int(&reader, *line, "example_id", reader.cell(record, *line, c_ex, "example_id")?)?;
        user_histories.entry(example).or_default().push(UserHistoryRow {
            movie_id: parse_int(&reader, *line, "movie_id", reader.cell(record, *line, c_mid, "movie_id")?)?,
            movie_title: reader.cell(record, *line, c_title, "movie_title")?.to_string(),
            genre: parse_genres(&reader, *line, "genre", reader.cell(record, *line, c_genre, "genre")?)?,
            release_date: parse_date(&reader, *line, "release_date", reader.cell(record, *line, c_rel, "release_date")?)?,
            rating: parse_rating(&reader, *line, "rating", reader.cell(record, *line, c_rating, "rating")?)?,
            rated_date: parse_date(&reader, *line, "rated_date", reader.cell(record, *line, c_rated, "rated_date")?)?,
        });
    }

    let mut movie_histories: BTreeMap<u32, Vec<MovieHistoryRow>> = BTreeMap::new();
    let reader = TableReader::open(&paths.movie_history)?;
    let c_ex = reader.column("example_id")?;
    let (c_uid, c_sim, c_avg) = (
        reader.column("user_id")?,
        reader.column("user_pref_similarity")?,
        reader.column("personal_average_score")?,
    );
    let (c_age, c_gender, c_occ, c_state) = (
        reader.column("age")?,
        reader.column("gender")?,
        reader.column("occupation")?,
        reader.column("state")?,
    );
    let (c_rated, c_rating) = (reader.column("rated_date")?, reader.column("rating")?);
    for (line, record) in &reader.records {
        let example = parse_int(&reader, *line, "example_id", reader.cell(record, *line, c_ex, "example_id")?)?;
        movie_histories.entry(example).or_default().push(MovieHistoryRow {
            user_id: parse_int(&reader, *line, "user_id", reader.cell(record, *line, c_uid, "user_id")?)?,
            user_pref_similarity: parse_float(&reader, *line, "user_pref_similarity", reader.cell(record, *line, c_sim, "user_pref_similarity")?)?,
            personal_average_score: parse_float(&reader, *line, "personal_average_score", reader.cell(record, *line, c_avg, "personal_average_score")?)?,
            age: parse_int(&reader, *line, "age", reader.cell(record, *line, c_age, "age")?)?,
            gender: reader.cell(record, *line, c_gender, "gender")?.to_string(),
            occupation: reader.cell(record, *line, c_occ, "occupation")?.to_string(),
            state: reader.cell(record, *line, c_state, "state")?.to_string(),
            rated_date: parse_date(&reader, *line, "rated_date", reader.cell(record, *line, c_rated, "rated_date")?)?,
            rating: parse_rating(&reader, *line, "rating", reader.cell(record, *line, c_rating, "rating")?)?,
        });
    }

    let mut golds: BTreeMap<u32, u8> = BTreeMap::new();
    let reader = TableReader::open(&paths.gold)?;
    let (c_ex, c_rating) = (reader.column("example_id")?, reader.column("rating")?);
    for (line, record) in &reader.records {
        let example = parse_int(&reader, *line, "example_id", reader.cell(record, *line, c_ex, "example_id")?)?;
        let rating = parse_rating(&reader, *line, "rating", reader.cell(record, *line, c_rating, "rating")?)?;
        golds.insert(example, rating);
    }

    let mut tasks = Vec::new();
    for (example_id, gold_rating) in golds {
        let user = users
            .remove(&example_id)
            .ok_or(IngestError::MissingPart { example: example_id, what: "basic_info_user row" })?;
        let movie = movies
            .remove(&example_id)
            .ok_or(IngestError::MissingPart { example: example_id, what: "basic_info_movie row" })?;
        tasks.push(RatingTask {
            example_id,
            user,
            movie,
            user_history: user_histories.remove(&example_id).unwrap_or_default(),
            movie_history: movie_histories.remove(&example_id).unwrap_or_default(),
            gold_rating,
        });
    }
    Ok(tasks)
}

/// Per-round MAE and RMSE over an example set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingMetrics {
    pub mae: Vec<f64>,
    pub rmse: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum RatingMetricsError {
    #[error("empty example set")]
    Empty,
    #[error("prediction series have unequal lengths")]
    RaggedSeries,
}

/// `MAE@r` and `RMSE@r` from per-example, per-round predictions.
pub fn rating_metrics(
    predictions: &[Vec<f64>],
    golds: &[f64],
) -> Result<RatingMetrics, RatingMetricsError> {
    if predictions.is_empty() || golds.len() != predictions.len() {
        return Err(RatingMetricsError::Empty);
    }
    let rounds = predictions[0].len();
    if predictions.iter().any(|p| p.len() != rounds) {
        return Err(RatingMetricsError::RaggedSeries);
    }
    let n = predictions.len() as f64;
    let mut mae = Vec::with_capacity(rounds);
    let mut rmse = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let mut abs_sum = 0.0;
        let mut sq_sum = 0.0;
        for (series, gold) in predictions.iter().zip(golds) {
            let err = series[round] - gold;
            abs_sum += err.abs();
            sq_sum += err * err;
        }
        mae.push(abs_sum / n);
        rmse.push((sq_sum / n).sqrt());
    }
    Ok(RatingMetrics { mae, rmse })
}

/// The rating prediction standing at the end of each round, with the
/// Always-Guess-4 fallback flagged as imputed.
pub fn standing_predictions(transcript: &Transcript) -> Vec<(f64, bool)> {
    let mut standing: Option<f64> = None;
    let mut out = Vec::with_capacity(transcript.rounds.len());
    for record in &transcript.rounds {
        if record.outcome.selected().is_some() {
            if let Some(entry) = transcript
                .accepted_history
                .iter()
                .find(|e| e.round == record.round)
            {
                standing = entry.proposal.body.as_rating();
            }
        }
        match standing {
            Some(value) => out.push((value, false)),
            None => out.push((ALWAYS_GUESS, true)),
        }
    }
    out
}

/// The rating environment for one example task.
#[derive(Debug, Clone)]
pub struct RatingEnv {
    pub task: RatingTask,
}

pub const RATING_AGENT_NAMES: [&str; 3] = ["BasicInfo Agent", "MovieHistory Agent", "UserHistory Agent"];

impl RatingEnv {
    pub fn new(task: RatingTask) -> Self {
        RatingEnv { task }
    }

    pub fn utility_of(&self, _agent: u32, body: &ProposalBody) -> Result<f64, BodyError> {
        let value = body.as_rating().ok_or(BodyError::WrongKind { expected: "rating" })?;
        // Scripted stand-ins prefer predictions close to the shared fallback.
        Ok(-(value - ALWAYS_GUESS).abs())
    }
}

impl Environment for RatingEnv {
    fn id(&self) -> EnvironmentId {
        EnvironmentId::Rating
    }

    fn agent_count(&self) -> usize {
        3
    }

    fn preferred_names(&self) -> Option<Vec<String>> {
        Some(RATING_AGENT_NAMES.iter().map(|s| s.to_string()).collect())
    }

    fn task_description(&self, _roster: &Roster) -> String {
        format!(
            "You will collaborate with other agents in a movie recommendation game.\n\
             In this game, you will collaboratively predict the rating of a target movie ({title}) for a target user.\n\
             There are 3 agents in this game: BasicInfo Agent, MovieHistory Agent, UserHistory Agent.\n\
             1. BasicInfo Agent has access to the basic information of the target movie and target user. It has access to the data with the following schema:\n\
             movie_info(movie_id, movie_title, release_date, genre)\n\
             user_info(user_id, age, gender, occupation, state)\n\
             2. MovieHistory Agent has access to the rating history of the target movie from other people. It has access to the data with the following schema:\n\
             movie_rating_history(user_id, user_pref_similarity, personal_average_score, age, gender, occupation, state, rated_date, rating)\n\
             3. UserHistory Agent has access to the rating history of the target user to other movies. It has access to the data with the following schema:\n\
             user_rating_history(movie_id, movie_title, genre, release_date, rating, rated_date)\n\
             \n\
             You can't see other agents' information directly, but you can get information from other agents through communication.\n\
             Your goal is to predict the rating a target user would give to {title}. Utilize all available information about both the user and the movie to make the most accurate prediction possible. You only have access to partial information, but you can communicate with other agents to get more information.",
            title = self.task.movie.movie_title,
        )
    }

    fn agent_background(&self, agent: u32, _roster: &Roster) -> String {
        let (access, dataset) = match agent {
            0 => (
                "the basic information of the target user and target movie",
                format!(
                    "user: user_id={}, age={}, gender={}, occupation={}, state={}\nmovie: movie_id={}, movie_title={}, release_date={}, genre={:?}",
                    self.task.user.user_id,
                    self.task.user.age,
                    self.task.user.gender,
                    self.task.user.occupation,
                    self.task.user.state,
                    self.task.movie.movie_id,
                    self.task.movie.movie_title,
                    self.task.movie.release_date,
                    self.task.movie.genre,
                ),
            ),
            1 => (
                "the rating history of the target movie from other people",
                self.task
                    .movie_history
                    .iter()
                    .map(|r| {
                        format!(
                            "user_id={}, user_pref_similarity={}, personal_average_score={}, age={}, gender={}, occupation={}, state={}, rated_date={}, rating={}",
                            r.user_id, r.user_pref_similarity, r.personal_average_score, r.age,
                            r.gender, r.occupation, r.state, r.rated_date, r.rating,
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
            _ => (
                "the rating history of the target user to other movies",
                self.task
                    .user_history
                    .iter()
                    .map(|r| {
                        format!(
                            "movie_id={}, movie_title={}, genre={:?}, release_date={}, rating={}, rated_date={}",
                            r.movie_id, r.movie_title, r.genre, r.release_date, r.rating, r.rated_date,
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
        };
        format!(
            "Your goal is to predict the rating the target user would give to the target movie. Utilize all available information about both the user and the movie to make the most accurate prediction possible. You only have access to {access}, but you can communicate with other agents to get more information.\n\n# Your Data:\n{dataset}"
        )
    }

    fn proposal_format_text(&self, _roster: &Roster) -> String {
        "<float, your predicted rating between 1 and 5>".to_string()
    }

    fn validate_body(&self, body: &ProposalBody) -> Result<(), BodyError> {
        let value = body.as_rating().ok_or(BodyError::WrongKind { expected: "rating" })?;
        if !(1.0..=5.0).contains(&value) {
            return Err(BodyError::RatingOutOfRange { value });
        }
        Ok(())
    }

    fn parse_proposal_payload(
        &self,
        value: &serde_json::Value,
        _roster: &Roster,
    ) -> Result<ProposalBody, BodyError> {
        let number = value
            .as_f64()
            .or_else(|| value.as_str().and_then(|s| s.parse().ok()))
            .ok_or_else(|| BodyError::Malformed("expected a numeric rating".into()))?;
        // Two-decimal canonical form.
        let body = ProposalBody::Rating {
            value: (number * 100.0).round() / 100.0,
        };
        self.validate_body(&body)?;
        Ok(body)
    }

    fn render_body(&self, body: &ProposalBody, _roster: &Roster) -> String {
        match body {
            ProposalBody::Rating { value } => format!("predicted rating {value:.2}"),
            ProposalBody::Allocation { .. } => "allocation (wrong environment)".to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_metrics_two_point_example() {
        let metrics = rating_metrics(&[vec![4.0], vec![4.0]], &[4.0, 2.0]).unwrap();
        assert!((metrics.mae[0] - 1.0).abs() < 1e-12);
        assert!((metrics.rmse[0] - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_have_zero_error() {
        let metrics = rating_metrics(&[vec![3.0, 3.0]], &[3.0]).unwrap();
        assert_eq!(metrics.mae, vec![0.0, 0.0]);
        assert_eq!(metrics.rmse, vec![0.0, 0.0]);
    }

    #[test]
    fn rmse_dominates_mae() {
        let metrics =
            rating_metrics(&[vec![1.0, 5.0], vec![4.0, 2.0], vec![3.3, 2.2]], &[2.0, 4.0, 3.0])
                .unwrap();
        for (mae, rmse) in metrics.mae.iter().zip(&metrics.rmse) {
            assert!(rmse >= mae);
        }
    }

    #[test]
    fn genre_lists_parse_mixed_quotes() {
        let reader = TableReader {
            file: "test.csv".to_string(),
            headers: vec![],
            records: vec![],
        };
        let genres = parse_genres(
            &reader,
            1,
            "genre",
            "['Animation', \"Children's\", 'Comedy']",
        )
        .unwrap();
        assert_eq!(genres, vec!["Animation", "Children's", "Comedy"]);
    }

    #[test]
    fn empty_example_set_is_an_error() {
        assert!(matches!(
            rating_metrics(&[], &[]),
            Err(RatingMetricsError::Empty)
        ));
    }
}
