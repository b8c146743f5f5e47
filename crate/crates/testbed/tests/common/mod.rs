#![allow(dead_code)]

use regex::Regex;

/// Minimal browser stand-in: one cookie, no redirects followed.
pub struct Client {
    http: reqwest::blocking::Client,
    base: String,
    pub cookie: Option<String>,
}

pub struct Reply {
    pub status: u16,
    pub location: Option<String>,
    pub body: String,
}

impl Client {
    pub fn new(base: &str) -> Client {
        Client {
            http: reqwest::blocking::Client::builder()
                .redirect(reqwest::redirect::Policy::none())
                .build()
                .unwrap(),
            base: base.to_string(),
            cookie: None,
        }
    }

    fn finish(&mut self, req: reqwest::blocking::RequestBuilder) -> Reply {
        let req = match &self.cookie {
            Some(c) => req.header("cookie", format!("SESSID={c}")),
            None => req,
        };
        let resp = req.send().unwrap();
        if let Some(sc) = resp.headers().get("set-cookie") {
            let sc = sc.to_str().unwrap();
            let v = sc.split(';').next().unwrap().trim_start_matches("SESSID=");
            self.cookie = Some(v.to_string());
        }
        let location = resp.headers().get("location").map(|l| l.to_str().unwrap().to_string());
        Reply {
            status: resp.status().as_u16(),
            location,
            body: resp.text().unwrap(),
        }
    }

    pub fn get(&mut self, path: &str) -> Reply {
        let req = self.http.get(format!("{}{path}", self.base));
        self.finish(req)
    }

    pub fn post(&mut self, path: &str, fields: &[(&str, &str)]) -> Reply {
        let body = form_urlencoded::Serializer::new(String::new()).extend_pairs(fields).finish();
        let req = self
            .http
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/x-www-form-urlencoded")
            .body(body);
        self.finish(req)
    }

    pub fn post_json(&mut self, path: &str, body: &serde_json::Value) -> Reply {
        let req = self
            .http
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .body(body.to_string());
        self.finish(req)
    }
}

/// `value` of the input named `name`.
pub fn input_value(html: &str, name: &str) -> Option<String> {
    let re = Regex::new(&format!(r#"name="{}" value="([^"]*)""#, regex::escape(name))).unwrap();
    re.captures(html).map(|c| c[1].to_string())
}

/// `action` of the first form.
pub fn form_action(html: &str) -> String {
    let re = Regex::new(r#"<form[^>]*action="([^"]*)""#).unwrap();
    re.captures(html).unwrap()[1].to_string()
}

pub fn is_rejection(body: &str) -> bool {
    body.contains("Request rejected") && !body.contains("<form") && !body.contains("<button")
}
