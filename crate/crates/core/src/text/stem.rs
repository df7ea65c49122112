//! Porter (1980) suffix-stripping stemmer, original rule set.
//!
//! Rules are applied in five steps. Within a rule list the first suffix that
//! matches ends the list, whether or not its measure condition holds. Words
//! of two letters or fewer, and words containing anything other than ASCII
//! lowercase letters, are returned unchanged.

/// Stems one lowercase token.
pub fn porter_stem(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut w = Word(word.as_bytes().to_vec());
    w.step1a();
    w.step1b();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5a();
    w.step5b();
    String::from_utf8(w.0).expect("ascii in, ascii out")
}

struct Word(Vec<u8>);

/// `(suffix, replacement)` pairs for step 2; measure must be positive.
const STEP2: &[(&str, &str)] = &[
    ("ational", "ate"),
    ("tional", "tion"),
    ("enci", "ence"),
    ("anci", "ance"),
    ("izer", "ize"),
    ("abli", "able"),
    ("alli", "al"),
    ("entli", "ent"),
    ("eli", "e"),
    ("ousli", "ous"),
    ("ization", "ize"),
    ("ation", "ate"),
    ("ator", "ate"),
    ("alism", "al"),
    ("iveness", "ive"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("aliti", "al"),
    ("iviti", "ive"),
    ("biliti", "ble"),
];

const STEP3: &[(&str, &str)] = &[
    ("icate", "ic"),
    ("ative", ""),
    ("alize", "al"),
    ("iciti", "ic"),
    ("ical", "ic"),
    ("ful", ""),
    ("ness", ""),
];

/// Suffixes removed in step 4 when the remaining stem has measure > 1.
const STEP4: &[&str] = &[
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent", "ion", "ou", "ism", "ate", "iti",
    "ous", "ive", "ize",
];

impl Word {
    fn ends(&self, suffix: &str) -> bool {
        self.0.ends_with(suffix.as_bytes())
    }

    fn stem_len(&self, suffix: &str) -> usize {
        self.0.len() - suffix.len()
    }

    fn replace(&mut self, suffix: &str, with: &str) {
        let keep = self.stem_len(suffix);
        self.0.truncate(keep);
        self.0.extend_from_slice(with.as_bytes());
    }

    /// Consonant test on the prefix `[0, len)`, position `i`.
    fn is_consonant(&self, i: usize) -> bool {
        match self.0[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.is_consonant(i - 1),
            _ => true,
        }
    }

    /// Number of vowel-consonant sequences in the first `len` letters.
    fn measure(&self, len: usize) -> usize {
        let mut m = 0;
        let mut i = 0;
        while i < len && self.is_consonant(i) {
            i += 1;
        }
        loop {
            while i < len && !self.is_consonant(i) {
                i += 1;
            }
            if i >= len {
                return m;
            }
            while i < len && self.is_consonant(i) {
                i += 1;
            }
            m += 1;
        }
    }

    fn has_vowel(&self, len: usize) -> bool {
        (0..len).any(|i| !self.is_consonant(i))
    }

    /// Prefix of length `len` ends in a double consonant.
    fn double_consonant(&self, len: usize) -> bool {
        len >= 2 && self.0[len - 1] == self.0[len - 2] && self.is_consonant(len - 1)
    }

    /// Prefix of length `len` ends consonant-vowel-consonant, last not w/x/y.
    fn cvc(&self, len: usize) -> bool {
        len >= 3
            && self.is_consonant(len - 3)
            && !self.is_consonant(len - 2)
            && self.is_consonant(len - 1)
            && !matches!(self.0[len - 1], b'w' | b'x' | b'y')
    }

    fn apply_rules(&mut self, rules: &[(&str, &str)], min_measure: usize) {
        if let Some(&(suffix, with)) = rules.iter().find(|(s, _)| self.ends(s)) {
            if self.measure(self.stem_len(suffix)) > min_measure {
                self.replace(suffix, with);
            }
        }
    }

    fn step1a(&mut self) {
        if self.ends("sses") {
            self.replace("sses", "ss");
        } else if self.ends("ies") {
            self.replace("ies", "i");
        } else if self.ends("ss") {
        } else if self.ends("s") {
            self.replace("s", "");
        }
    }

    fn step1b(&mut self) {
        if self.ends("eed") {
            if self.measure(self.stem_len("eed")) > 0 {
                self.replace("eed", "ee");
            }
            return;
        }
        let removed = ["ed", "ing"]
            .into_iter()
            .find(|s| self.ends(s) && self.has_vowel(self.stem_len(s)));
        let Some(suffix) = removed else { return };
        self.replace(suffix, "");

        if self.ends("at") || self.ends("bl") || self.ends("iz") {
            self.0.push(b'e');
        } else if self.double_consonant(self.0.len()) && !matches!(self.0.last(), Some(b'l' | b's' | b'z')) {
            self.0.pop();
        } else if self.measure(self.0.len()) == 1 && self.cvc(self.0.len()) {
            self.0.push(b'e');
        }
    }

    fn step1c(&mut self) {
        if self.ends("y") && self.has_vowel(self.stem_len("y")) {
            self.replace("y", "i");
        }
    }

    fn step2(&mut self) {
        self.apply_rules(STEP2, 0);
    }

    fn step3(&mut self) {
        self.apply_rules(STEP3, 0);
    }

    fn step4(&mut self) {
        let Some(suffix) = STEP4.iter().find(|s| self.ends(s)) else {
            return;
        };
        let stem = self.stem_len(suffix);
        if self.measure(stem) <= 1 {
            return;
        }
        if *suffix == "ion" && !(stem > 0 && matches!(self.0[stem - 1], b's' | b't')) {
            return;
        }
        self.0.truncate(stem);
    }

    fn step5a(&mut self) {
        if !self.ends("e") {
            return;
        }
        let stem = self.stem_len("e");
        let m = self.measure(stem);
        if m > 1 || (m == 1 && !self.cvc(stem)) {
            self.0.truncate(stem);
        }
    }

    fn step5b(&mut self) {
        let len = self.0.len();
        if self.measure(len) > 1 && self.double_consonant(len) && self.ends("l") {
            self.0.pop();
        }
    }
}
