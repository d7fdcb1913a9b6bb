//! Parser: lexes line by line, parses statements with per-line recovery,
//! then resolves declarations and references in two passes so forward
//! references work regardless of declaration order.

use std::collections::{btree_map, BTreeMap, BTreeSet};

use crate::model::{
    containment_cycles, validate_identifier, AccessEntry, AccessMode, ConstraintId, ObjectBinding,
    ObjectId, Policy, PolicyMode, ProcId, Role, RoleId, TranId, Transaction, UserId,
};
use crate::sod::{DynamicSodConstraint, StaticSodConstraint};

use super::{ParseError, ParseErrorCode, SourceSpan};

#[derive(Debug, Clone)]
struct Spanned<T> {
    value: T,
    span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TokenKind {
    Word(String),
    Colon,
    Comma,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    span: SourceSpan,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Lexes one line (comments already meaningful: `#` cuts the rest). On a
/// lexical error the diagnostic is recorded and the line is discarded.
fn lex_line(line_no: usize, text: &str, errors: &mut Vec<ParseError>) -> Option<Vec<Token>> {
    let content = match text.find('#') {
        Some(i) => &text[..i],
        None => text,
    };
    let chars: Vec<char> = content.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == ' ' || c == '\t' || c == '\r' {
            i += 1;
            continue;
        }
        if c == ':' || c == ',' {
            tokens.push(Token {
                kind: if c == ':' { TokenKind::Colon } else { TokenKind::Comma },
                span: SourceSpan::new(line_no, i + 1, 1),
            });
            i += 1;
            continue;
        }
        if is_word_char(c) {
            let start = i;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Word(chars[start..i].iter().collect()),
                span: SourceSpan::new(line_no, start + 1, i - start),
            });
            continue;
        }
        errors.push(ParseError {
            span: SourceSpan::new(line_no, i + 1, 1),
            code: ParseErrorCode::Lex,
            message: format!("unexpected character {c:?}"),
        });
        return None;
    }
    Some(tokens)
}

struct Cursor<'t> {
    tokens: &'t [Token],
    pos: usize,
    line: usize,
}

fn syntax(span: SourceSpan, message: String) -> ParseError {
    ParseError {
        span,
        code: ParseErrorCode::Syntax,
        message,
    }
}

impl<'t> Cursor<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_word(&self) -> Option<&'t str> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Word(w),
                ..
            }) => Some(w),
            _ => None,
        }
    }

    /// Where the cursor points: the next token, or just past the last one.
    fn here(&self) -> SourceSpan {
        match self.peek() {
            Some(t) => t.span,
            None => match self.tokens.last() {
                Some(t) => SourceSpan::new(self.line, t.span.column + t.span.length, 1),
                None => SourceSpan::new(self.line, 1, 1),
            },
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<SourceSpan, ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Word(w),
                span,
            }) if w == kw => {
                self.pos += 1;
                Ok(*span)
            }
            _ => Err(syntax(self.here(), format!("expected {kw:?}"))),
        }
    }

    fn word(&mut self, what: &str) -> Result<Spanned<String>, ParseError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Word(w),
                span,
            }) => {
                self.pos += 1;
                Ok(Spanned {
                    value: w.clone(),
                    span: *span,
                })
            }
            _ => Err(syntax(self.here(), format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<Spanned<String>, ParseError> {
        let word = self.word(what)?;
        if let Err(e) = validate_identifier(&word.value) {
            return Err(ParseError {
                span: word.span,
                code: ParseErrorCode::Lex,
                message: format!("invalid {what}: {e}"),
            });
        }
        Ok(word)
    }

    fn number(&mut self, what: &str) -> Result<Spanned<u64>, ParseError> {
        let word = self.word(what)?;
        if word.value.chars().all(|c| c.is_ascii_digit()) {
            if let Ok(n) = word.value.parse::<u64>() {
                return Ok(Spanned {
                    value: n,
                    span: word.span,
                });
            }
        }
        Err(syntax(
            word.span,
            format!("expected a number for {what}, got {:?}", word.value),
        ))
    }

    fn access_mode(&mut self) -> Result<Spanned<AccessMode>, ParseError> {
        let word = self.word("an access mode")?;
        match word.value.parse::<AccessMode>() {
            Ok(mode) => Ok(Spanned {
                value: mode,
                span: word.span,
            }),
            Err(_) => Err(syntax(
                word.span,
                format!(
                    "expected an access mode (read, write, append, execute), got {:?}",
                    word.value
                ),
            )),
        }
    }

    fn eat_comma(&mut self) -> bool {
        if matches!(
            self.peek(),
            Some(Token {
                kind: TokenKind::Comma,
                ..
            })
        ) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn id_list(&mut self, what: &str) -> Result<Vec<Spanned<String>>, ParseError> {
        let mut out = vec![self.ident(what)?];
        while self.eat_comma() {
            out.push(self.ident(what)?);
        }
        Ok(out)
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(syntax(
                t.span,
                "unexpected tokens after the end of the statement".to_string(),
            )),
        }
    }
}

#[derive(Debug)]
enum RawStmt {
    Header {
        name: Spanned<String>,
        mode: PolicyMode,
        single_active_role: bool,
    },
    User {
        id: Spanned<String>,
    },
    Object {
        id: Spanned<String>,
    },
    Tran {
        id: Spanned<String>,
        procedure: Spanned<String>,
        binds: Vec<(Spanned<String>, Vec<Spanned<AccessMode>>)>,
    },
    Role {
        id: Spanned<String>,
        allocates: Vec<Spanned<String>>,
        contains: Vec<Spanned<String>>,
        members: Vec<Spanned<String>>,
    },
    StaticSod {
        id: Spanned<String>,
        roles: Vec<Spanned<String>>,
        max: Spanned<u64>,
    },
    DynamicSod {
        id: Spanned<String>,
        transactions: Vec<Spanned<String>>,
        since: Option<Spanned<u64>>,
    },
    Restrict {
        user: Spanned<String>,
        transactions: Vec<Spanned<String>>,
    },
    Access {
        keyword: SourceSpan,
        role: Spanned<String>,
        tran: Spanned<String>,
        object: Spanned<String>,
        mode: Spanned<AccessMode>,
    },
}

impl RawStmt {
    fn span(&self) -> SourceSpan {
        match self {
            RawStmt::Header { name, .. } => name.span,
            RawStmt::User { id }
            | RawStmt::Object { id }
            | RawStmt::Tran { id, .. }
            | RawStmt::Role { id, .. }
            | RawStmt::StaticSod { id, .. }
            | RawStmt::DynamicSod { id, .. } => id.span,
            RawStmt::Restrict { user, .. } => user.span,
            RawStmt::Access { keyword, .. } => *keyword,
        }
    }
}

fn parse_stmt(cursor: &mut Cursor<'_>) -> Result<RawStmt, ParseError> {
    let head = cursor.word("a statement keyword")?;
    let stmt = match head.value.as_str() {
        "policy" => {
            let name = cursor.ident("policy name")?;
            cursor.keyword("mode")?;
            let mode_word = cursor.word("a policy mode")?;
            let mode = match mode_word.value.as_str() {
                "bound" => PolicyMode::BoundTransaction,
                "rule4" => PolicyMode::Rule4,
                other => {
                    return Err(syntax(
                        mode_word.span,
                        format!("expected bound or rule4, got {other:?}"),
                    ))
                }
            };
            let single_active_role = if cursor.peek_word() == Some("single-active-role") {
                cursor.pos += 1;
                true
            } else {
                false
            };
            RawStmt::Header {
                name,
                mode,
                single_active_role,
            }
        }
        "user" => RawStmt::User {
            id: cursor.ident("user identifier")?,
        },
        "object" => RawStmt::Object {
            id: cursor.ident("object identifier")?,
        },
        "transaction" => {
            let id = cursor.ident("transaction identifier")?;
            cursor.keyword("proc")?;
            let procedure = cursor.ident("procedure identifier")?;
            let mut binds = Vec::new();
            if cursor.peek_word() == Some("binds") {
                cursor.pos += 1;
                while cursor.peek().is_some() {
                    let object = cursor.ident("object identifier")?;
                    match cursor.peek() {
                        Some(Token {
                            kind: TokenKind::Colon,
                            ..
                        }) => cursor.pos += 1,
                        _ => {
                            return Err(syntax(
                                cursor.here(),
                                "expected ':' between object and modes".to_string(),
                            ))
                        }
                    }
                    let mut modes = vec![cursor.access_mode()?];
                    while cursor.eat_comma() {
                        modes.push(cursor.access_mode()?);
                    }
                    binds.push((object, modes));
                }
                if binds.is_empty() {
                    return Err(syntax(
                        cursor.here(),
                        "binds requires at least one object:mode pair".to_string(),
                    ));
                }
            }
            RawStmt::Tran {
                id,
                procedure,
                binds,
            }
        }
        "role" => {
            let id = cursor.ident("role identifier")?;
            let mut allocates = Vec::new();
            let mut contains = Vec::new();
            let mut members = Vec::new();
            if cursor.peek_word() == Some("allocates") {
                cursor.pos += 1;
                allocates = cursor.id_list("transaction identifier")?;
            }
            if cursor.peek_word() == Some("contains") {
                cursor.pos += 1;
                contains = cursor.id_list("role identifier")?;
            }
            if cursor.peek_word() == Some("members") {
                cursor.pos += 1;
                members = cursor.id_list("user identifier")?;
            }
            RawStmt::Role {
                id,
                allocates,
                contains,
                members,
            }
        }
        "static-sod" => {
            let id = cursor.ident("constraint identifier")?;
            cursor.keyword("roles")?;
            let roles = cursor.id_list("role identifier")?;
            cursor.keyword("max")?;
            let max = cursor.number("max memberships")?;
            RawStmt::StaticSod { id, roles, max }
        }
        "dynamic-sod" => {
            let id = cursor.ident("constraint identifier")?;
            cursor.keyword("transactions")?;
            let transactions = cursor.id_list("transaction identifier")?;
            let since = if cursor.peek_word() == Some("since") {
                cursor.pos += 1;
                Some(cursor.number("since ordinal")?)
            } else {
                None
            };
            RawStmt::DynamicSod {
                id,
                transactions,
                since,
            }
        }
        "restrict" => {
            let user = cursor.ident("user identifier")?;
            cursor.keyword("to")?;
            // An empty list is legal here: it narrows the user to nothing.
            let transactions = if cursor.peek().is_none() {
                Vec::new()
            } else {
                cursor.id_list("transaction identifier")?
            };
            RawStmt::Restrict { user, transactions }
        }
        "access" => RawStmt::Access {
            keyword: head.span,
            role: cursor.ident("role identifier")?,
            tran: cursor.ident("transaction identifier")?,
            object: cursor.ident("object identifier")?,
            mode: cursor.access_mode()?,
        },
        other => {
            return Err(syntax(
                head.span,
                format!("unknown statement {other:?}"),
            ))
        }
    };
    cursor.finish()?;
    Ok(stmt)
}

/// Parses a complete policy file, reporting every detectable error with
/// its source span. `Ok` implies the policy passes
/// [`Policy::validate`] with no findings.
pub fn parse_policy(source: &str) -> Result<Policy, Vec<ParseError>> {
    let mut errors: Vec<ParseError> = Vec::new();
    let mut stmts: Vec<RawStmt> = Vec::new();
    for (i, raw_line) in source.lines().enumerate() {
        let Some(tokens) = lex_line(i + 1, raw_line, &mut errors) else {
            continue;
        };
        if tokens.is_empty() {
            continue;
        }
        let mut cursor = Cursor {
            tokens: &tokens,
            pos: 0,
            line: i + 1,
        };
        match parse_stmt(&mut cursor) {
            Ok(stmt) => stmts.push(stmt),
            Err(e) => errors.push(e),
        }
    }

    let policy = resolve(&stmts, &mut errors);

    if errors.is_empty() {
        // Belt and braces: a clean parse must imply a clean validation.
        for v in policy.validate() {
            errors.push(syntax(SourceSpan::new(1, 1, 1), v.message));
        }
    }
    if errors.is_empty() {
        Ok(policy)
    } else {
        errors.sort();
        errors.dedup();
        Err(errors)
    }
}

/// [`parse_policy`] over raw bytes; invalid UTF-8 is a `LEX` error at the
/// first undecodable byte rather than a lossy substitution.
pub fn parse_policy_bytes(source: &[u8]) -> Result<Policy, Vec<ParseError>> {
    match std::str::from_utf8(source) {
        Ok(text) => parse_policy(text),
        Err(e) => {
            let prefix = &source[..e.valid_up_to()];
            let text = std::str::from_utf8(prefix).expect("prefix is valid by construction");
            let line = text.bytes().filter(|b| *b == b'\n').count() + 1;
            let column = text
                .rsplit('\n')
                .next()
                .map(|tail| tail.chars().count())
                .unwrap_or(0)
                + 1;
            Err(vec![ParseError {
                span: SourceSpan::new(line, column, 1),
                code: ParseErrorCode::Lex,
                message: "invalid UTF-8 sequence".to_string(),
            }])
        }
    }
}

fn dup(span: SourceSpan, message: String) -> ParseError {
    ParseError {
        span,
        code: ParseErrorCode::DuplicateDecl,
        message,
    }
}

fn unknown(span: SourceSpan, message: String) -> ParseError {
    ParseError {
        span,
        code: ParseErrorCode::UnknownRef,
        message,
    }
}

fn resolve(stmts: &[RawStmt], errors: &mut Vec<ParseError>) -> Policy {
    let mut policy = Policy::named("default");

    // Header: exactly one, and it must lead the file.
    let mut seen_header = false;
    for (i, stmt) in stmts.iter().enumerate() {
        if let RawStmt::Header {
            name,
            mode,
            single_active_role,
        } = stmt
        {
            if seen_header {
                errors.push(dup(name.span, "policy header already declared".to_string()));
                continue;
            }
            seen_header = true;
            if i != 0 {
                errors.push(syntax(
                    name.span,
                    "the policy header must be the first statement".to_string(),
                ));
            }
            policy.name = name.value.clone();
            policy.mode = *mode;
            policy.single_active_role = *single_active_role;
        }
    }
    if !seen_header {
        let span = stmts
            .first()
            .map(RawStmt::span)
            .unwrap_or(SourceSpan::new(1, 1, 1));
        errors.push(syntax(
            span,
            "missing policy header (expected: policy <id> mode bound|rule4)".to_string(),
        ));
    }

    // Pass 1: declarations. Duplicates keep their first declaration.
    let mut declared_constraints: BTreeSet<String> = BTreeSet::new();
    let mut declared_restricts: BTreeSet<String> = BTreeSet::new();
    for stmt in stmts {
        match stmt {
            RawStmt::User { id } => {
                let user = UserId::new(&id.value).expect("validated by the statement parser");
                if !policy.users.insert(user) {
                    errors.push(dup(id.span, format!("user {} already declared", id.value)));
                }
            }
            RawStmt::Object { id } => {
                let object = ObjectId::new(&id.value).expect("validated by the statement parser");
                if !policy.objects.insert(object) {
                    errors.push(dup(id.span, format!("object {} already declared", id.value)));
                }
            }
            RawStmt::Tran { id, procedure, .. } => {
                let tran = TranId::new(&id.value).expect("validated by the statement parser");
                if policy.transactions.contains_key(&tran) {
                    errors.push(dup(
                        id.span,
                        format!("transaction {} already declared", id.value),
                    ));
                } else {
                    let proc_id =
                        ProcId::new(&procedure.value).expect("validated by the statement parser");
                    policy
                        .transactions
                        .insert(tran.clone(), Transaction::new(tran, proc_id));
                }
            }
            RawStmt::Role { id, .. } => {
                let role = RoleId::new(&id.value).expect("validated by the statement parser");
                match policy.roles.entry(role) {
                    btree_map::Entry::Occupied(_) => {
                        errors.push(dup(id.span, format!("role {} already declared", id.value)));
                    }
                    btree_map::Entry::Vacant(slot) => {
                        slot.insert(Role::default());
                    }
                }
            }
            RawStmt::StaticSod { id, .. } | RawStmt::DynamicSod { id, .. } => {
                if !declared_constraints.insert(id.value.clone()) {
                    errors.push(dup(
                        id.span,
                        format!("constraint {} already declared", id.value),
                    ));
                }
            }
            RawStmt::Restrict { user, .. } => {
                if !declared_restricts.insert(user.value.clone()) {
                    errors.push(dup(
                        user.span,
                        format!("restriction for {} already declared", user.value),
                    ));
                }
            }
            RawStmt::Header { .. } | RawStmt::Access { .. } => {}
        }
    }

    // Pass 2: resolution. Only the first declaration of a duplicated name
    // contributes details.
    let mut resolved_trans: BTreeSet<TranId> = BTreeSet::new();
    let mut resolved_roles: BTreeSet<RoleId> = BTreeSet::new();
    let mut resolved_constraints: BTreeSet<String> = BTreeSet::new();
    let mut resolved_restricts: BTreeSet<UserId> = BTreeSet::new();
    let mut edge_spans: BTreeMap<(RoleId, RoleId), SourceSpan> = BTreeMap::new();
    for stmt in stmts {
        match stmt {
            RawStmt::Tran { id, binds, .. } => {
                let tran = TranId::new(&id.value).unwrap();
                if !resolved_trans.insert(tran.clone()) {
                    continue;
                }
                let mut bindings = Vec::new();
                let mut seen_objects: BTreeSet<ObjectId> = BTreeSet::new();
                for (object, modes) in binds {
                    let oid = ObjectId::new(&object.value).unwrap();
                    if !policy.objects.contains(&oid) {
                        errors.push(unknown(
                            object.span,
                            format!("unknown object {}", object.value),
                        ));
                        continue;
                    }
                    if !seen_objects.insert(oid.clone()) {
                        errors.push(dup(
                            object.span,
                            format!("object {} bound twice in one transaction", object.value),
                        ));
                        continue;
                    }
                    bindings.push(ObjectBinding {
                        object: oid,
                        modes: modes.iter().map(|m| m.value).collect(),
                    });
                }
                if policy.mode == PolicyMode::BoundTransaction && binds.is_empty() {
                    errors.push(ParseError {
                        span: id.span,
                        code: ParseErrorCode::EmptyBinding,
                        message: format!(
                            "transaction {} binds no objects (required in bound mode)",
                            id.value
                        ),
                    });
                }
                policy
                    .transactions
                    .get_mut(&tran)
                    .expect("declared in pass 1")
                    .bindings = bindings;
            }
            RawStmt::Role {
                id,
                allocates,
                contains,
                members,
            } => {
                let role_id = RoleId::new(&id.value).unwrap();
                if !resolved_roles.insert(role_id.clone()) {
                    continue;
                }
                let mut allocated: BTreeSet<TranId> = BTreeSet::new();
                for t in allocates {
                    let tran = TranId::new(&t.value).unwrap();
                    if policy.transactions.contains_key(&tran) {
                        allocated.insert(tran);
                    } else {
                        errors.push(unknown(t.span, format!("unknown transaction {}", t.value)));
                    }
                }
                let mut contained: BTreeSet<RoleId> = BTreeSet::new();
                for r in contains {
                    let child = RoleId::new(&r.value).unwrap();
                    if policy.roles.contains_key(&child) {
                        edge_spans.insert((role_id.clone(), child.clone()), r.span);
                        contained.insert(child);
                    } else {
                        errors.push(unknown(r.span, format!("unknown role {}", r.value)));
                    }
                }
                let mut membership: BTreeSet<UserId> = BTreeSet::new();
                for u in members {
                    let user = UserId::new(&u.value).unwrap();
                    if policy.users.contains(&user) {
                        membership.insert(user);
                    } else {
                        errors.push(unknown(u.span, format!("unknown user {}", u.value)));
                    }
                }
                let role = policy.roles.get_mut(&role_id).expect("declared in pass 1");
                role.transactions = allocated;
                role.contains = contained;
                role.members = membership;
            }
            RawStmt::StaticSod { id, roles, max } => {
                if !resolved_constraints.insert(id.value.clone()) {
                    continue;
                }
                let mut set: BTreeSet<RoleId> = BTreeSet::new();
                let mut all_known = true;
                for r in roles {
                    let role = RoleId::new(&r.value).unwrap();
                    if policy.roles.contains_key(&role) {
                        set.insert(role);
                    } else {
                        errors.push(unknown(r.span, format!("unknown role {}", r.value)));
                        all_known = false;
                    }
                }
                if roles.len() < 2 {
                    errors.push(syntax(
                        id.span,
                        "static-sod requires at least two roles".to_string(),
                    ));
                    continue;
                }
                if set.len() < roles.len() && all_known {
                    errors.push(dup(
                        id.span,
                        "static-sod lists the same role twice".to_string(),
                    ));
                    continue;
                }
                if max.value == 0 {
                    errors.push(syntax(max.span, "max must be at least 1".to_string()));
                    continue;
                }
                if max.value > u64::from(u32::MAX) {
                    errors.push(syntax(max.span, "max is out of range".to_string()));
                    continue;
                }
                if all_known {
                    let cid = ConstraintId::new(&id.value).unwrap();
                    let constraint =
                        StaticSodConstraint::with_max(cid.clone(), set, max.value as u32)
                            .expect("arity and cap checked above");
                    policy.static_sod.insert(cid, constraint);
                }
            }
            RawStmt::DynamicSod {
                id,
                transactions,
                since,
            } => {
                if !resolved_constraints.insert(id.value.clone()) {
                    continue;
                }
                let mut set: BTreeSet<TranId> = BTreeSet::new();
                let mut all_known = true;
                for t in transactions {
                    let tran = TranId::new(&t.value).unwrap();
                    if policy.transactions.contains_key(&tran) {
                        set.insert(tran);
                    } else {
                        errors.push(unknown(t.span, format!("unknown transaction {}", t.value)));
                        all_known = false;
                    }
                }
                if transactions.len() < 2 {
                    errors.push(syntax(
                        id.span,
                        "dynamic-sod requires at least two transactions".to_string(),
                    ));
                    continue;
                }
                if set.len() < transactions.len() && all_known {
                    errors.push(dup(
                        id.span,
                        "dynamic-sod lists the same transaction twice".to_string(),
                    ));
                    continue;
                }
                if all_known {
                    let cid = ConstraintId::new(&id.value).unwrap();
                    let constraint = DynamicSodConstraint::since(
                        cid.clone(),
                        set,
                        since.as_ref().map(|s| s.value).unwrap_or(0),
                    )
                    .expect("arity checked above");
                    policy.dynamic_sod.insert(cid, constraint);
                }
            }
            RawStmt::Restrict { user, transactions } => {
                let user_id = UserId::new(&user.value).unwrap();
                if !resolved_restricts.insert(user_id.clone()) {
                    continue;
                }
                if !policy.users.contains(&user_id) {
                    errors.push(unknown(user.span, format!("unknown user {}", user.value)));
                    continue;
                }
                let mut set: BTreeSet<TranId> = BTreeSet::new();
                for t in transactions {
                    let tran = TranId::new(&t.value).unwrap();
                    if policy.transactions.contains_key(&tran) {
                        set.insert(tran);
                    } else {
                        errors.push(unknown(t.span, format!("unknown transaction {}", t.value)));
                    }
                }
                policy.restrictions.insert(user_id, set);
            }
            RawStmt::Access {
                keyword,
                role,
                tran,
                object,
                mode,
            } => {
                let role_id = RoleId::new(&role.value).unwrap();
                let tran_id = TranId::new(&tran.value).unwrap();
                let object_id = ObjectId::new(&object.value).unwrap();
                let mut ok = true;
                if !policy.roles.contains_key(&role_id) {
                    errors.push(unknown(role.span, format!("unknown role {}", role.value)));
                    ok = false;
                }
                if !policy.transactions.contains_key(&tran_id) {
                    errors.push(unknown(tran.span, format!("unknown transaction {}", tran.value)));
                    ok = false;
                }
                if !policy.objects.contains(&object_id) {
                    errors.push(unknown(
                        object.span,
                        format!("unknown object {}", object.value),
                    ));
                    ok = false;
                }
                if policy.mode == PolicyMode::BoundTransaction {
                    errors.push(ParseError {
                        span: *keyword,
                        code: ParseErrorCode::ModeConflict,
                        message: "access entries apply to rule4 policies only".to_string(),
                    });
                    ok = false;
                }
                if ok {
                    policy.access_table.insert(AccessEntry {
                        role: role_id,
                        tran: tran_id,
                        object: object_id,
                        mode: mode.value,
                    });
                }
            }
            RawStmt::Header { .. } | RawStmt::User { .. } | RawStmt::Object { .. } => {}
        }
    }

    // Pass 3: whole-policy checks that need the resolved graph.
    for cycle in containment_cycles(&policy) {
        // Report at the edge of the cycle that appears last in the file.
        let span = cycle
            .windows(2)
            .filter_map(|w| edge_spans.get(&(w[0].clone(), w[1].clone())))
            .max()
            .copied()
            .unwrap_or(SourceSpan::new(1, 1, 1));
        let path = cycle
            .iter()
            .map(RoleId::as_str)
            .collect::<Vec<_>>()
            .join(" -> ");
        errors.push(ParseError {
            span,
            code: ParseErrorCode::Cycle,
            message: format!("role containment cycle: {path}"),
        });
    }

    for stmt in stmts {
        if let RawStmt::Restrict { user, transactions } = stmt {
            let user_id = UserId::new(&user.value).unwrap();
            if !policy.users.contains(&user_id) {
                continue;
            }
            let ceiling = policy.reachable_transactions_of_user(&user_id);
            for t in transactions {
                let tran = TranId::new(&t.value).unwrap();
                if policy.transactions.contains_key(&tran) && !ceiling.contains(&tran) {
                    errors.push(ParseError {
                        span: t.span,
                        code: ParseErrorCode::RestrictionWidens,
                        message: format!(
                            "{} cannot reach {} through any role",
                            user.value, t.value
                        ),
                    });
                }
            }
        }
    }

    for stmt in stmts {
        if let RawStmt::StaticSod { id, .. } = stmt {
            let cid = ConstraintId::new(&id.value).unwrap();
            let Some(constraint) = policy.static_sod.get(&cid) else {
                continue;
            };
            for violation in crate::sod::violations_of(&policy, constraint) {
                errors.push(ParseError {
                    span: id.span,
                    code: ParseErrorCode::StaticSod,
                    message: format!("declared memberships violate the constraint: {violation}"),
                });
            }
        }
    }

    policy
}
