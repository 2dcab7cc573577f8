//! Shared fixtures: a throwaway HTTP server and a small constructed corpus.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use ctxner::corpus::{detokenize, write_annotated, Document, EntityClass, Tag};

#[derive(Debug, Clone)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub body: String,
}

type Handler = dyn Fn(&Request) -> (u16, String) + Send + Sync;

/// Answers every connection with `handler`, one request per connection.
pub struct StubServer {
    pub url: String,
    hits: Arc<AtomicUsize>,
    log: Arc<Mutex<Vec<Request>>>,
}

impl StubServer {
    pub fn start(handler: impl Fn(&Request) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let log = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let (h, l) = (hits.clone(), log.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (handler, h, l) = (handler.clone(), h.clone(), l.clone());
                thread::spawn(move || serve(stream, &*handler, &h, &l));
            }
        });
        StubServer { url, hits, log }
    }

    /// Always answers `status` with `body`.
    pub fn fixed(status: u16, body: &str) -> Self {
        let body = body.to_string();
        Self::start(move |_| (status, body.clone()))
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<Request> {
        self.log.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, handler: &Handler, hits: &AtomicUsize, log: &Mutex<Vec<Request>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();
    let mut length = 0;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header).unwrap_or(0) == 0 || header.trim().is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let request = Request {
        method,
        path,
        body: String::from_utf8_lossy(&body).into_owned(),
    };
    hits.fetch_add(1, Ordering::SeqCst);
    log.lock().unwrap().push(request.clone());
    let (status, payload) = handler(&request);
    let response = format!(
        "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let mut stream = stream;
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
}

pub const KNOWN_PER: [&str; 6] = ["Croaker", "Elmo", "Goblin", "Otto", "Hagop", "Raven"];
pub const KNOWN_LOC: [&str; 3] = ["Juniper", "Oar", "Beryl"];
/// Names missing from the gazetteer. Each one is only recognizable through
/// retrieved sentences that show it next to a known person.
pub const UNKNOWN_PER: [&str; 10] = [
    "Tobin", "Mira", "Kessel", "Darrow", "Quill", "Sorrel", "Brannock", "Lisk", "Fenn", "Varro",
];

pub fn gazetteer() -> BTreeMap<String, EntityClass> {
    let mut g = BTreeMap::new();
    for p in KNOWN_PER {
        g.insert(p.to_string(), EntityClass::Per);
    }
    for l in KNOWN_LOC {
        g.insert(l.to_string(), EntityClass::Loc);
    }
    g.insert("Black Company".to_string(), EntityClass::Org);
    g
}

fn tag_sentence(text: &str) -> (Vec<String>, Vec<Tag>) {
    let tokens: Vec<String> = text.split(' ').map(String::from).collect();
    let mut tags = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        let t = tokens[i].as_str();
        if t == "Black" && tokens.get(i + 1).map(String::as_str) == Some("Company") {
            tags.extend([Tag::B(EntityClass::Org), Tag::I(EntityClass::Org)]);
            i += 2;
            continue;
        }
        let tag = if KNOWN_PER.contains(&t) || UNKNOWN_PER.contains(&t) {
            Tag::B(EntityClass::Per)
        } else if KNOWN_LOC.contains(&t) {
            Tag::B(EntityClass::Loc)
        } else {
            Tag::O
        };
        tags.push(tag);
        i += 1;
    }
    (tokens, tags)
}

/// First-chapter sentences and unannotated remainder of book `d`.
fn book_sentences(d: usize) -> (Vec<String>, Vec<String>) {
    let p = |i: usize| KNOWN_PER[(d + i) % KNOWN_PER.len()];
    let l = |i: usize| KNOWN_LOC[(d + i) % KNOWN_LOC.len()];
    let (u1, u2) = (UNKNOWN_PER[2 * d], UNKNOWN_PER[2 * d + 1]);
    let chapter = vec![
        format!("{} looked at the sky .", p(0)),
        format!("{u1} whistled a tune ."),
        format!("The wind was cold in {} .", l(0)),
        format!("{} and {} played cards .", p(1), p(2)),
        format!("{u1} and {} shared a meal .", p(0)),
        format!("The road to {} was long .", l(1)),
        format!("{u2} counted the coins ."),
        format!("{} slept near the fire .", p(3)),
        format!("{} , {u1} and {} rode north .", p(0), p(1)),
        "The Black Company marched at dawn .".to_string(),
        format!("{} and {u2} kept watch .", p(4)),
        format!("The rain fell on {} .", l(2)),
        format!("{u2} , {} and {} argued .", p(5), p(2)),
        "It was quiet after that .".to_string(),
    ];
    let rest = vec![
        format!("{} fed the horses .", p(2)),
        format!("The walls of {} were old .", l(1)),
        format!("{} sharpened a knife .", p(3)),
        "The fog lifted slowly .".to_string(),
        format!("{} told a long story .", p(4)),
        format!("Snow covered {} .", l(2)),
    ];
    (chapter, rest)
}

pub fn book_id(d: usize) -> String {
    format!("book{}", d + 1)
}

/// The five constructed books, built in memory.
pub fn mock_corpus() -> Vec<Document> {
    (0..5)
        .map(|d| {
            let (chapter, rest) = book_sentences(d);
            let chapter_len = chapter.len();
            let sentences = chapter
                .iter()
                .map(|s| {
                    let (tokens, tags) = tag_sentence(s);
                    (tokens, Some(tags))
                })
                .chain(rest.iter().map(|s| (s.split(' ').map(String::from).collect(), None)))
                .collect();
            Document::new(book_id(d), book_id(d), sentences, chapter_len).unwrap()
        })
        .collect()
}

/// Writes the corpus (`<id>.conll` + `<id>.txt`) and `gazetteer.tsv` under
/// `dir`.
pub fn write_mock_corpus(dir: &Path) {
    let corpus = dir.join("corpus");
    fs::create_dir_all(&corpus).unwrap();
    for d in 0..5 {
        let (chapter, rest) = book_sentences(d);
        let annotated: Vec<_> = chapter.iter().map(|s| tag_sentence(s)).collect();
        fs::write(corpus.join(format!("{}.conll", book_id(d))), write_annotated(&annotated)).unwrap();
        let text = |sents: &[String]| {
            sents
                .iter()
                .map(|s| detokenize(&s.split(' ').collect::<Vec<_>>()))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let full = format!("Chapter One\n\n{}\n\n{}\n", text(&chapter), text(&rest));
        fs::write(corpus.join(format!("{}.txt", book_id(d))), full).unwrap();
    }
    let gaz: String = gazetteer()
        .iter()
        .map(|(s, c)| format!("{s}\t{}\n", c.as_str()))
        .collect();
    fs::write(dir.join("gazetteer.tsv"), gaz).unwrap();
}
