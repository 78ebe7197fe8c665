use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use itemseg::cli::convert_bytes;
use itemseg::edgar::{EdgarClient, EdgarConfig, FetchError, HttpTransport, Transport};
use itemseg_core::ingest::{parse_master_index, unwrap_document_sessions, FilingDate};

const INDEX: &str = include_str!("fixtures/master_2020q1.idx");
const FILING: &str = include_str!("fixtures/acme_10k.txt");
const FILING_PATH: &str = "edgar/data/1000228/0001000228-20-000012.txt";

#[derive(Default)]
struct Recorder {
    responses: HashMap<String, Result<Vec<u8>, u16>>,
    calls: Mutex<Vec<(String, String)>>,
}

impl Recorder {
    fn with(mut self, url: &str, body: &str) -> Self {
        self.responses.insert(url.to_string(), Ok(body.as_bytes().to_vec()));
        self
    }

    fn calls(&self) -> Vec<(String, String)> {
        self.calls.lock().unwrap().clone()
    }
}

impl Transport for Recorder {
    fn get(&self, url: &str, user_agent: &str) -> Result<Vec<u8>, FetchError> {
        self.calls
            .lock()
            .unwrap()
            .push((url.to_string(), user_agent.to_string()));
        match self.responses.get(url) {
            Some(Ok(body)) => Ok(body.clone()),
            Some(Err(status)) => Err(FetchError::Http {
                status: *status,
                url: url.to_string(),
            }),
            None => Err(FetchError::Http {
                status: 404,
                url: url.to_string(),
            }),
        }
    }
}

fn config(dir: &std::path::Path) -> EdgarConfig {
    EdgarConfig {
        base_url: "https://www.sec.gov/Archives".into(),
        cache_dir: dir.to_path_buf(),
        rate_limit: 1000.0,
        user_agent: "Test Suite test@example.com".into(),
    }
}

fn filing_url() -> String {
    format!("https://www.sec.gov/Archives/{FILING_PATH}")
}

#[test]
fn index_fixture_records() {
    let refs = parse_master_index(INDEX, &["10-K", "10-K405"]).unwrap();
    assert_eq!(refs.len(), 3);
    assert_eq!(refs[0].cik, "1000180");
    assert_eq!(refs[0].form_type, "10-K405");
    assert_eq!(refs[1].company_name, "HENRY SCHEIN INC");
    assert_eq!(refs[1].date_filed, FilingDate::new(2020, 2, 19).unwrap());
    assert_eq!(refs[1].path, FILING_PATH);
    assert_eq!(refs[2].cik, "1000232");
    assert!(parse_master_index(INDEX, &[]).unwrap().is_empty());
}

#[test]
fn master_index_is_fetched_once() {
    let dir = tempfile::tempdir().unwrap();
    let url = "https://www.sec.gov/Archives/edgar/full-index/2020/QTR1/master.idx";
    let client = EdgarClient::new(config(dir.path()), Recorder::default().with(url, INDEX)).unwrap();
    assert_eq!(client.fetch_master_index(2020, 1).unwrap(), INDEX);
    assert_eq!(client.fetch_master_index(2020, 1).unwrap(), INDEX);
    assert_eq!(client_calls(&client).len(), 1);
    assert!(client.fetch_master_index(2020, 5).is_err());
}

#[test]
fn warm_cache_makes_no_requests() {
    let dir = tempfile::tempdir().unwrap();
    let refs = parse_master_index(INDEX, &["10-K"]).unwrap();
    let filing = &refs[0];
    let client = EdgarClient::new(config(dir.path()), Recorder::default().with(&filing_url(), FILING)).unwrap();

    let first = client.fetch_filing(filing).unwrap();
    assert_eq!(first, FILING.as_bytes());
    let calls = client_calls(&client);
    assert_eq!(calls.len(), 1);
    assert_eq!(calls[0].1, "Test Suite test@example.com");
    assert!(dir.path().join("edgar_data_1000228_0001000228-20-000012.txt").is_file());

    let second = client.fetch_filing(filing).unwrap();
    assert_eq!(second, first);
    assert_eq!(client_calls(&client).len(), 1);

    // a fresh client over the same cache never touches its transport
    let cold = EdgarClient::new(config(dir.path()), Recorder::default()).unwrap();
    assert_eq!(cold.fetch_filing(filing).unwrap(), first);
    assert!(client_calls(&cold).is_empty());
}

fn client_calls(client: &EdgarClient<Recorder>) -> Vec<(String, String)> {
    client.transport().calls()
}

#[test]
fn http_failures_are_retriable() {
    let dir = tempfile::tempdir().unwrap();
    let mut rec = Recorder::default();
    rec.responses.insert(filing_url(), Err(503));
    let client = EdgarClient::new(config(dir.path()), rec).unwrap();
    let err = client.fetch_path(FILING_PATH).unwrap_err();
    assert!(matches!(err, FetchError::Http { status: 503, .. }));
    assert!(err.is_retriable());
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn unreachable_host_is_retriable() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.base_url = "http://127.0.0.1:9".into();
    let client = EdgarClient::new(cfg, HttpTransport::new(Duration::from_secs(2)).unwrap()).unwrap();
    let err = client.fetch_path(FILING_PATH).unwrap_err();
    assert!(matches!(err, FetchError::Network { .. }), "{err}");
    assert!(err.is_retriable());
}

#[test]
fn user_agent_is_mandatory() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.user_agent = "  ".into();
    assert!(EdgarClient::new(cfg, Recorder::default()).is_err());
    let mut cfg = config(dir.path());
    cfg.rate_limit = 0.0;
    assert!(EdgarClient::new(cfg, Recorder::default()).is_err());
}

#[test]
fn concurrent_fetches_of_distinct_filings() {
    let dir = tempfile::tempdir().unwrap();
    let mut rec = Recorder::default();
    let paths: Vec<String> = (0..8)
        .map(|i| format!("edgar/data/{i}/000000000{i}-20-000001.txt"))
        .collect();
    for (i, p) in paths.iter().enumerate() {
        rec = rec.with(&format!("https://www.sec.gov/Archives/{p}"), &format!("filing {i}"));
    }
    let client = EdgarClient::new(config(dir.path()), rec).unwrap();
    std::thread::scope(|s| {
        for p in &paths {
            let client = &client;
            s.spawn(move || client.fetch_path(p).unwrap());
        }
    });
    for (i, p) in paths.iter().enumerate() {
        assert_eq!(client.fetch_path(p).unwrap(), format!("filing {i}").as_bytes());
    }
    assert_eq!(client_calls(&client).len(), 8);
}

#[test]
fn submission_converts_primary_document() {
    let sessions = unwrap_document_sessions(FILING).unwrap();
    assert_eq!(sessions.len(), 2);
    assert_eq!(sessions[0].doc_type, "10-K");
    assert_eq!(sessions[1].doc_type, "EX-21");
    let doc = convert_bytes("acme", "acme_10k.txt", FILING.as_bytes().to_vec(), &["10-K"]).unwrap();
    let expected = [
        "UNITED STATES",
        "SECURITIES AND EXCHANGE COMMISSION",
        "FORM 10-K",
        "Item 1. Business 3",
        "Item 1A. Risk Factors 8",
        "Item 7. Management\u{2019}s Discussion and Analysis 20",
        "PART I",
        "Item 1. Business",
        "Acme Corp. designs & sells anvils to customers in North America.",
        "We were founded in 1949 and employ about 1,200 people.",
        "Item 1A. Risk Factors",
        "Our results depend on the price of steel and on demand from cartoon studios.",
        "PART II",
        "Item 7. Management\u{2019}s Discussion and Analysis of Financial Condition and Results of Operations",
        "Revenue grew in 2019 on higher anvil volumes.",
        "SIGNATURES",
    ];
    assert_eq!(doc.lines, expected);
    assert!(convert_bytes("acme", "acme_10k.txt", FILING.as_bytes().to_vec(), &["10-Q"]).is_err());
}
