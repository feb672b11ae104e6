#include "hldet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>
#include <stdexcept>
#include <string>

#include "hldet/common.hpp"

namespace hldet::synth {

namespace {

// Grammar symbols are written {name}; alternatives are '|'-separated and may
// carry a weight suffix "*w". An empty alternative expands to nothing.
// A long-tail word list sampled with Zipf-Mandelbrot weights by rank.
struct Lexicon {
  std::vector<std::string> words;
  std::vector<double> cdf;

  const std::string& draw(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, cdf.back());
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u(rng));
    return words[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), words.size() - 1)];
  }
};

struct Grammar {
  std::map<std::string, std::vector<std::pair<std::string, double>>> rules;
  std::map<std::string, const Lexicon*> lexicons;

  void add(const std::string& sym, const std::string& alternatives) {
    auto& dst = rules[sym];
    std::size_t start = 0;
    while (start <= alternatives.size()) {
      std::size_t bar = alternatives.find('|', start);
      if (bar == std::string::npos) bar = alternatives.size();
      std::string alt = alternatives.substr(start, bar - start);
      double w = 1.0;
      if (auto star = alt.rfind('*'); star != std::string::npos && star + 1 < alt.size() &&
                                      std::isdigit(static_cast<unsigned char>(alt[star + 1]))) {
        w = std::stod(alt.substr(star + 1));
        alt = alt.substr(0, star);
      }
      dst.emplace_back(alt, w);
      start = bar + 1;
    }
  }

  std::string expand(const std::string& sym, Rng& rng, int depth = 0) const {
    if (depth > 12) throw std::logic_error("grammar recursion too deep at " + sym);
    if (auto lex = lexicons.find(sym); lex != lexicons.end()) return lex->second->draw(rng);
    auto it = rules.find(sym);
    if (it == rules.end()) throw std::logic_error("unknown grammar symbol " + sym);
    const auto& alts = it->second;
    double total = 0;
    for (const auto& a : alts) total += a.second;
    std::uniform_real_distribution<double> u(0.0, total);
    double pick = u(rng);
    const std::string* chosen = &alts.back().first;
    for (const auto& a : alts) {
      if (pick < a.second) {
        chosen = &a.first;
        break;
      }
      pick -= a.second;
    }
    std::string out;
    const std::string& s = *chosen;
    for (std::size_t i = 0; i < s.size();) {
      if (s[i] == '{') {
        auto close = s.find('}', i);
        out += expand(s.substr(i + 1, close - i - 1), rng, depth + 1);
        i = close + 1;
      } else {
        out += s[i++];
      }
    }
    return out;
  }
};

// Pronounceable pseudo-words: one to three onset-vowel-coda syllables plus an optional suffix.
std::string pseudo_word(Rng& rng, int min_syllables, int max_syllables, const std::vector<std::string>& suffixes,
                        double suffix_prob) {
  static const std::vector<std::string> onsets{"b",  "br", "c",  "ch", "d",  "dr", "f",  "g",  "gr", "h",
                                               "j",  "k",  "l",  "m",  "n",  "p",  "pr", "r",  "s",  "sh",
                                               "st", "t",  "tr", "v",  "w",  "z",  "bl", "cl", "fl", "gl",
                                               "pl", "sl", "sc", "sp", "th", "wh", "",   ""};
  static const std::vector<std::string> vowels{"a", "e", "i", "o", "u", "a", "e", "i", "o", "ai", "ea", "ee", "oo", "ou"};
  static const std::vector<std::string> codas{"",  "",   "",   "n",  "r",  "l",  "s",  "t",  "m",
                                              "ck", "ng", "rd", "rn", "st", "th", "ll", "nd", "rt"};
  auto pick = [&rng](const std::vector<std::string>& v) -> const std::string& {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  const int n = std::uniform_int_distribution<int>(min_syllables, max_syllables)(rng);
  std::string w;
  for (int i = 0; i < n; ++i) w += pick(onsets) + pick(vowels) + pick(codas);
  if (!suffixes.empty() && std::bernoulli_distribution(suffix_prob)(rng)) w += pick(suffixes);
  return w;
}

Lexicon make_lexicon(std::size_t size, std::uint64_t seed, int min_syllables, int max_syllables,
                     const std::vector<std::string>& suffixes, double suffix_prob) {
  Rng rng(seed);
  Lexicon lex;
  std::unordered_set<std::string> seen;
  while (lex.words.size() < size) {
    auto w = pseudo_word(rng, min_syllables, max_syllables, suffixes, suffix_prob);
    if (w.size() >= 3 && seen.insert(w).second) lex.words.push_back(std::move(w));
  }
  double acc = 0.0;
  for (std::size_t r = 0; r < size; ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r) + 2.7, 0.8);
    lex.cdf.push_back(acc);
  }
  return lex;
}

// Same words, with every rank past the first `keep` reshuffled: names that make
// the news change from year to year.
Lexicon drifted(const Lexicon& base, int year, std::size_t keep) {
  Lexicon lex = base;
  Rng rng(0x6e616d65ULL + static_cast<std::uint64_t>(year));
  std::shuffle(lex.words.begin() + static_cast<std::ptrdiff_t>(std::min(keep, lex.words.size())), lex.words.end(), rng);
  return lex;
}

struct Lexicons {
  Lexicon first_names = make_lexicon(3000, 11, 1, 2, {"a", "ie", "y", "o", "en"}, 0.35);
  Lexicon surnames = make_lexicon(40000, 12, 1, 2, {"son", "ski", "ton", "ley", "man", "er", "ell", "ini", "ova", "ham"}, 0.45);
  Lexicon towns = make_lexicon(12000, 13, 1, 2,
                               {"ville", "ton", "dale", "wood", "field", "bury", "ford", "brook", "vale", "gong", "bah",
                                "up", "arra", "alla", "ong", "inga", " creek", " bay", " heads", " springs"},
                               0.7);
  Lexicon rare_nouns = make_lexicon(20000, 14, 2, 3, {"ism", "ation", "ite", "ology", "er", "ery", "ment", "ine", "ium", "osis"}, 0.5);
};

const Lexicons& lexicons() {
  static const Lexicons l;
  return l;
}

void base_rules(Grammar& g) {
  g.add("headline",
        "{crime}{opt_tail}*6|{politics}{opt_tail}*6|{sport}*4|{health}{opt_tail}*3|{economy}{opt_tail}*3|"
        "{disaster}{opt_tail}*3|{rural}{opt_tail}*3|{local}{opt_tail}*3|{world}{opt_tail}*3|{hot}*4|"
        "{interview}*1");
  g.add("opt_tail",
        "*4| amid {concern}*1| after {reason}*1| despite {concern}*1| as {concern} grows*1|"
        " over {concern}*1| following {reason}*1");
  g.add("concern",
        "safety concerns|community anger|funding shortfall|staff shortages|rising costs|local opposition|"
        "budget pressure|legal challenge|public backlash|union concerns|ongoing delays|industry fears");
  g.add("reason",
        "long delays|heavy rain|strong winds|public pressure|months of talks|a review|complaints|"
        "a coronial inquest|new figures|an audit|a wet winter|years of neglect");

  // crime
  g.add("crime",
        "{person} {crime_pass} over {crime_adj}{crime_event}{opt_place}*4|"
        "police {investigate} {crime_event}{opt_place}*3|"
        "police {hunt} {suspect} after {crime_event}{opt_place}*2|"
        "{person} {court_verb} {court_obj}*2|"
        "{person} {crime_pass} for {crime_event} {role_of}*1|"
        "{number} {people} {crime_pass} after {crime_event}{opt_place}*1|"
        "{place} {crime_event} {accused} {court_verb} {court_obj}*1|"
        "{crime_event} {victim_noun} {named_verb}*1");
  g.add("person",
        "man*5|woman*4|teenager*2|driver*2|teen*1|mother*1|father*1|youth*1|pensioner*1|"
        "{place} man*2|{place} woman*2|former {role}*1|boy*1|girl*1|truck driver*1|nurse*1|"
        "{first_name} {surname}*24|{role} {surname}*2");
  g.add("people", "men|women|teenagers|people|youths|drivers|protesters");
  g.add("crime_pass",
        "charged*5|jailed*3|arrested*3|sentenced*2|fined*2|acquitted*1|hospitalised*1|injured*2|"
        "killed*2|refused bail*1|granted bail*1|found guilty*1|questioned*1");
  g.add("crime_adj", "*4|alleged *2|violent *1|late night *1|weekend *1|christmas day *1|early morning *1");
  g.add("crime_event",
        "crash*3|fatal crash*2|robbery*2|armed robbery*1|assault*3|stabbing*2|house fire*1|"
        "hit and run*1|drug haul*1|shooting*1|break in*1|fraud*1|death*2|siege*1|brawl*1|"
        "car chase*1|attack*2|sexual assault*1|ice bust*1|carjacking*1");
  g.add("investigate", "investigate*3|probe*2|search for clues in*1|appeal for witnesses to*1");
  g.add("hunt", "hunt*2|seek*2|release image of*1");
  g.add("suspect", "gunman|driver|thief|suspect|man|offender|bandits");
  g.add("court_verb", "faces*3|appears in*2|pleads guilty to*2|denies*1|fronts*1");
  g.add("court_obj", "court*3|murder charge*2|drug charges*2|assault charge*2|manslaughter charge*1|supreme court*1");
  g.add("accused", "accused|suspect|driver|killer");
  g.add("victim_noun", "victim|driver|teen|man|woman");
  g.add("named_verb", "named*2|identified*2|remembered*1|farewelled*1|dies in hospital*1");
  g.add("role_of", "in {place}|in court|on appeal|after trial");

  // politics
  g.add("politics",
        "{gov} {pol_verb} {policy}{opt_for_place}*5|{place} {gov} {pol_verb} {number_money} {policy}*2|"
        "{gov} to {pol_verb_base} {policy}*3|"
        "{gov} under fire over {policy}*2|"
        "{leader} {pol_verb} {policy}*2|"
        "{leader} says {policy} {will} {outcome}*2|"
        "calls for {policy} inquiry*1|"
        "{party} {pol_verb} {leader} over {policy}*1|"
        "{place} council {council_verb} {local_thing}*2|"
        "{policy} {outcome_past} in {chamber}*1");
  g.add("gov",
        "government*4|state government*2|federal government*2|premier*2|minister*2|opposition*2|"
        "council*2|labor*1|coalition*1|greens*1|treasurer*1|health minister*1|senate*1|mp*1|mayor*1");
  g.add("pol_verb",
        "announces*3|unveils*2|rejects*2|backs*2|defends*2|slams*1|promises*2|considers*1|scraps*1|"
        "delays*1|reviews*1|welcomes*1|criticises*1|flags*1|pledges*1");
  g.add("pol_verb_base",
        "announce|unveil|reject|review|scrap|delay|fund|consider|overhaul|introduce|expand|cut");
  g.add("policy", "{policy_mod} {policy_noun}*5|{policy_noun}*1|new {policy_mod} {policy_noun}*2");
  g.add("policy_mod",
        "health*3|education*2|water*2|housing*2|mining*2|hospital*2|school*2|road*2|rail*1|"
        "energy*2|climate*1|gst*1|tax*1|budget*1|gas*1|jobs*1|infrastructure*1|pokies*1|"
        "indigenous*1|childcare*1|power*1|gambling*1|fishing*1|tourism*1|{rare_noun}*20");
  g.add("policy_noun",
        "funding*4|plan*4|budget*2|policy*3|reform*2|inquiry*1|cuts*2|tax*1|bill*2|changes*2|"
        "package*1|strategy*1|review*1|deal*1|levy*1|laws*1|program*1");
  g.add("will", "will*2|won't*1|could*1|to");
  g.add("outcome", "help families|cost jobs|boost economy|hurt regions|save money|go ahead|fail|work");
  g.add("outcome_past", "passed|defeated|blocked|delayed");
  g.add("chamber", "parliament|senate|upper house|lower house");
  g.add("party", "labor|liberals|nationals|greens|unions|backbenchers");
  g.add("council_verb", "approves*2|rejects*2|debates*1|delays*1|considers*1|backs*1");
  g.add("local_thing",
        "{place} development|new pool|rates rise|parking changes|skate park|caravan park plan|"
        "high rise proposal|dog park|budget|bypass plan|library upgrade");

  // sport
  g.add("sport",
        "{team} {beat} {team}*2|{team} {beat} {team} to {sport_outcome}*2|{team} {beat} {team} in {sport_adj} {sport_result}*1|{team} {beat} {team} in {sport_event}*1|"
        "{player} {player_news}*3|{team} coach {player} {coach_news}*1|"
        "{team} {sport_state} after {sport_result}*2|{place} to host {sport_event}*1|"
        "{team} name {team_news}*1|{sport_event} {sport_event_news}*1");
  g.add("team",
        "crows|eagles|swans|tigers|storm|broncos|roosters|cowboys|wallabies|socceroos|matildas|"
        "australia|hawks|magpies|dockers|power|bombers|kangaroos|sharks|raiders|victory|"
        "wanderers|jets|brumbies|waratahs|reds|demons|bulldogs|lions|giants|suns");
  g.add("beat", "beat*4|down*2|thrash*1|edge*2|upset*1|overpower*1|hold off*1|crush*1");
  g.add("player_news",
        "ruled out*2|returns from injury*2|signs with {team}*2|retires*2|suspended*1|"
        "named captain*1|cleared to play*1|wins {award}*1|eyes {sport_event}*1");
  g.add("award", "brownlow|medal|award|title|gold");
  g.add("coach_news", "quits|re-signs|backs players|under pressure|sacked");
  g.add("sport_state", "confident*1|upbeat*1|regroup*1|rue missed chances*1|celebrate*1|slump*1");
  g.add("sport_result", "loss|win|draw|thriller|upset loss|big win");
  g.add("sport_outcome", "stay top|keep finals hopes alive|snap losing streak|claim minor premiership|reach grand final|stay unbeaten|go top of ladder");
  g.add("sport_adj", "tight|tense|dramatic|one sided|rain affected|extra time");
  g.add("team_news", "new captain|squad|unchanged side|young side|new coach");
  g.add("sport_event_news", "tickets sell out|crowd record|preparations begin|draw released");

  // health
  g.add("health",
        "{health_actor} {health_verb} {condition}{opt_place}*4|"
        "{health_actor} link {condition} to {condition}*1|"
        "{place} hospital {hospital_news}*2|"
        "new {condition} {treatment} {treatment_news}*2|"
        "{condition} cases {trend}{opt_place}*2");
  g.add("health_actor",
        "doctors*2|nurses*1|researchers*2|scientists*2|health officials*1|experts*2|"
        "health department*1|paramedics*1|patients*1");
  g.add("health_verb",
        "warn about*2|call for action on*1|urge caution over*1|discover new {condition} gene*1|"
        "trial new {condition} drug*1|welcome {condition} funding*1");
  g.add("condition",
        "cancer*3|flu*2|diabetes*1|dementia*1|mental health*2|obesity*1|heart disease*1|"
        "measles*1|whooping cough*1|melanoma*1|asthma*1|ice addiction*1|{rare_noun}*12");
  g.add("hospital_news",
        "beds shortage*1|emergency wait times*1|upgrade delayed*1|staff shortage*1|expansion approved*1");
  g.add("treatment", "treatment|drug|vaccine|trial|test|clinic");
  g.add("treatment_news", "shows promise|offers hope|approved|launched|delayed");
  g.add("trend", "rise|fall|double|surge|drop|spike");

  // economy
  g.add("economy",
        "{market} {market_move}*3|{market} {market_move} as {market} {market_move}*2|"
        "{company} to cut {number} jobs*2|{company} {profit_news}*2|"
        "{econ_thing} {trend}{opt_place}*2|rba {rba_news}*1|"
        "{place} {econ_thing} {trend}*2|jobs {job_news}{opt_place}*1");
  g.add("market",
        "dollar|shares|asx|market|wall street|iron ore|oil prices|gold price|house prices|petrol prices");
  g.add("market_move",
        "rise|fall|slump|surge|steady|close higher|close lower|hit record high|hit six year low|dip|rally");
  g.add("company",
        "bhp*2|rio tinto*2|qantas*2|telstra*2|woolworths*2|coles*2|holden*2|ford*1|toyota*1|alcoa*1|arrium*1|"
        "{place} mine*2|local manufacturer*1|major bank*1|mining company*1|{surname} {org_type}*12");
  g.add("org_type", "group|mining|constructions|holdings|farms|brewery|airlines|energy|resources|pharmaceuticals|"
                    "industries|foods|transport|wines|developments");
  g.add("profit_news", "posts record profit|profit falls|profit rises|shares slump|announces restructure");
  g.add("econ_thing", "unemployment|inflation|building approvals|retail sales|wages|rents|exports|tourism");
  g.add("rba_news", "holds rates|cuts rates|keeps cash rate on hold|warns on housing");
  g.add("job_news", "boost|losses|figures|market tightens");

  // disasters
  g.add("disaster",
        "{hazard} {hazard_verb} {place} {hazard_obj}*4|"
        "residents {evac} as {hazard} {approach}*2|"
        "{hazard} warning for {place}*2|"
        "{hazard} clean up continues{opt_place}*1|"
        "{place} {hazard} victims {victim_news}*1");
  g.add("hazard",
        "bushfire*4|flood*3|storm*3|cyclone*2|heatwave*2|drought*2|grass fire*1|hail storm*1|"
        "earthquake*1|floodwaters*1");
  g.add("hazard_verb", "threatens*2|hits*2|batters*1|destroys*1|damages*1|cuts off*1|sweeps through*1");
  g.add("hazard_obj", "homes*3|town*2|farms*2|properties*1|roads*1|communities*1");
  g.add("evac", "evacuated*2|warned*2|urged to leave*1|prepare*1");
  g.add("approach", "approaches|spreads|intensifies|worsens|nears");
  g.add("victim_news", "receive aid|seek help|rebuild|count cost|angry at response");

  // rural
  g.add("rural",
        "{farmers} {rural_verb} {rural_thing}*4|{crop} {crop_news}{opt_place}*3|"
        "{rural_thing} {trend} for {farmers}*2|{place} {livestock} {livestock_news}*1");
  g.add("farmers",
        "farmers*4|growers*2|graziers*1|dairy farmers*2|wheat growers*1|cane growers*1|fishermen*1|"
        "irrigators*1|winemakers*1|beekeepers*1");
  g.add("rural_verb", "welcome*2|fear*1|angry over*2|count cost of*1|call for help with*1|hopeful about*1");
  g.add("rural_thing",
        "milk prices*2|water allocations*2|drought assistance*2|live export ban*1|grain prices*1|"
        "wool prices*1|cattle prices*1|rain*1|fruit fly*1|wild dogs*1|carbon tax*1|{rare_noun}*12");
  g.add("crop", "wheat crop|grain harvest|mango season|citrus crop|cotton crop|barley harvest|grape harvest|"
                "{rare_noun} crop*3");
  g.add("crop_news", "looks promising|hit by frost|below average|record yield|delayed by rain");
  g.add("livestock", "cattle|sheep|dairy cows|pigs|prawn farm");
  g.add("livestock_news", "sales strong|prices soar|disease scare|tick outbreak");

  // local
  g.add("local",
        "{place} {local_noun} {local_news}*3|{place} {local_noun} {local_news} {local_when}*2|{number} {local_people} {local_people_news}{opt_place}*2|"
        "{place} {local_event} draws crowds*1|{place} residents {local_verb} {local_thing}*2");
  g.add("local_noun",
        "school|hospital|airport|port|library|pool|bridge|highway|festival|zoo|museum|show|market|"
        "council|community|church|theatre|jetty|{rare_noun}*16|{surname} park*2|{surname} street*2");
  g.add("local_news",
        "upgrade|closure|opens|reopens|celebrates anniversary|funding boost|plans unveiled|under threat|"
        "expansion|set to close|future uncertain");
  g.add("local_when", "next year|this summer|after upgrade|for good|within months|by 2020|despite protests");
  g.add("local_people", "students|volunteers|residents|workers|families|tourists|locals|refugees");
  g.add("local_people_news", "rescued|honoured|stranded|evacuated|relocated|recognised");
  g.add("local_event", "festival|show|fun run|parade|market|races|concert");
  g.add("local_verb", "oppose*2|support*1|fight*1|protest*1|divided over*1|welcome*1");

  // world
  g.add("world",
        "{country} {world_verb} {world_thing}*2|{country} {world_verb} {world_thing} with {country}*2|{number} dead in {country} {world_event}*2|"
        "{world_leader} {world_verb} {world_thing}*2|australians {aus_news} in {country}*1");
  g.add("country", "china|japan|indonesia|us|india|france|russia|png|fiji|nz|uk|syria|iraq|egypt");
  g.add("world_verb", "warns on|condemns|signs|rejects|backs|announces|probes|welcomes");
  g.add("world_thing", "trade deal|climate pact|sanctions|peace talks|election result|nuclear plan|aid package");
  g.add("world_event", "bombing|earthquake|floods|bus crash|attack|protest|plane crash|landslide");
  g.add("aus_news", "safe|missing|stranded|injured|detained|killed");

  g.add("interview",
        "interview with {player}*2|interview with {leader}*2|{leader} speaks to abc*1|{player} speaks*1");

  // shared
  g.add("opt_place", "*2| in {place}*3| at {place}*1| near {place}*1| in {region}*1");
  g.add("region", "western sydney|north queensland|the pilbara|the kimberley|far north queensland|the riverland|central victoria|the hunter|the south west|gippsland|the wheatbelt|the top end");
  g.add("opt_for_place", "*3| for {place}*1| in {place}*1");
  g.add("number_money", "$10 million|$2 million|$50m|$1.5 billion|$300,000|multi million dollar|$5m");
  g.add("number", "two*3|three*3|four*2|five*2|six*1|10*1|100*1|12*1|20*1|dozens of*1");
  g.add("role", "teacher|priest|police officer|coach|councillor|soldier|doctor|lawyer");
  g.add("place",
        "sydney*3|melbourne*3|brisbane*3|perth*3|adelaide*3|hobart*2|darwin*2|canberra*2|geelong*1|"
        "cairns*1|townsville*1|bendigo*1|ballarat*1|launceston*1|wollongong*1|newcastle*1|mackay*1|"
        "toowoomba*1|bunbury*1|mildura*1|alice springs*1|broken hill*1|nsw*2|qld*2|wa*2|sa*2|tas*1|"
        "nt*1|vic*2|gold coast*1|sunshine coast*1|tamworth*1|dubbo*1|albany*1|port augusta*1|"
        "kalgoorlie*1|rockhampton*1|bundaberg*1|gladstone*1|wagga*1|orange*1|shepparton*1|"
        "warrnambool*1|devonport*1|katherine*1|esperance*1|mount gambier*1|whyalla*1|lismore*1|"
        "{town}*90");
}

struct YearFlavor {
  const char* leader;
  const char* player;
  const char* sport_event;
  const char* world_leader;
  const char* hot;
};

// Topic drift: each year adds its own entities and hot stories.
const std::map<int, YearFlavor>& flavors() {
  static const std::map<int, YearFlavor> f = {
      {2008, {"rudd*3|nelson*1|bligh*1|brumby*1", "thorpe|hayden|stoner|pearce|hewitt",
              "olympics*2|beijing games*1|ashes*1", "bush|obama|hu jintao",
              "apology to stolen generations|global financial crisis|wall street crisis|olympic torch relay"}},
      {2009, {"rudd*3|turnbull*1|brumby*1|rann*1", "hayden|ponting|stoner|cadel evans|thorpe",
              "ashes*2|grand final*1|world cup qualifier*1", "obama|brown|kim jong il",
              "black saturday bushfires|swine flu outbreak|stimulus package|bushfire royal commission"}},
      {2010, {"rudd*2|gillard*3|abbott*2|keneally*1", "ponting|clarke|stoner|pearce|ablett",
              "world cup*2|commonwealth games*2|ashes*1", "obama|cameron|sarkozy",
              "mining tax debate|hung parliament|swine flu vaccine|asylum seeker boats"}},
      {2011, {"gillard*3|abbott*2|baillieu*1|o'farrell*1", "clarke|cadel evans|pearce|ablett|sam stosur",
              "rugby world cup*2|tour de france*1|grand final*1", "obama|gaddafi|cameron",
              "queensland floods recovery|carbon tax plan|christchurch earthquake|tsunami in japan"}},
      {2012, {"gillard*3|abbott*2|newman*2|barnett*1", "clarke|stoner|sally pearson|ablett|james magnussen",
              "olympics*3|london games*2|ashes*1", "obama|romney|putin",
              "carbon tax starts|london olympics|gonski reforms|slipper affair"}},
      {2013, {"gillard*2|rudd*2|abbott*3|napthine*1", "clarke|ablett|goodes|pearson|hodge",
              "ashes*2|british and irish lions tour*1|grand final*1", "obama|xi jinping|pope francis",
              "election campaign|leadership spill|asylum seeker policy|tasmanian bushfires"}},
      {2014, {"abbott*3|shorten*2|hockey*2|newman*1", "clarke|hodge|goodes|cahill|kyrgios",
              "world cup*2|commonwealth games*1|asian cup*1", "obama|putin|modi",
              "mh370 search|mh17 disaster|ebola outbreak|budget cuts|lindt cafe siege"}},
      {2015, {"abbott*2|turnbull*3|shorten*2|andrews*1", "smith|hodge|goodes|kyrgios|cahill",
              "cricket world cup*2|asian cup*2|ashes*1", "obama|cameron|xi jinping",
              "leadership spill|bali nine executions|paris attacks|ice epidemic|same sex marriage debate"}},
      {2016, {"turnbull*3|shorten*2|hanson*1|weatherill*1", "smith|warner|kyrgios|ablett|hodge",
              "olympics*3|rio games*2|big bash*1", "obama|trump|clinton",
              "us election|brexit vote|zika virus|census failure|double dissolution election|sa blackout"}},
      {2017, {"turnbull*3|shorten*2|hanson*1|palaszczuk*1", "smith|warner|ash barty|starc|dangerfield",
              "ashes*2|aflw season*1|rugby league world cup*1", "trump|xi jinping|macron|kim jong un",
              "same sex marriage survey|citizenship crisis|cyclone debbie|north korea tensions|energy crisis"}},
  };
  return f;
}

void year_rules(Grammar& g, int year) {
  const auto& f = flavors();
  auto it = f.lower_bound(year);
  if (it == f.end()) it = std::prev(f.end());
  const YearFlavor& y = it->second;
  g.rules.erase("leader");
  g.rules.erase("player");
  g.rules.erase("sport_event");
  g.rules.erase("world_leader");
  g.rules.erase("hot_story");
  g.add("leader", std::string(y.leader) + "|{first_name} {surname}*4");
  g.add("player", std::string(y.player) + "|{first_name} {surname}*8");
  g.add("sport_event", y.sport_event);
  g.add("world_leader", y.world_leader);
  g.add("hot_story", y.hot);
  g.rules.erase("hot");
  g.add("hot",
        "{hot_story} {hot_news}*4|{leader} {hot_verb} {hot_story}*2|"
        "{hot_story}: {hot_reaction}*1|{place} {hot_people} {hot_verb} {hot_story}*1");
  g.add("hot_news",
        "latest*2|continues*1|sparks debate*1|divides community*1|dominates agenda*1|live updates*1|"
        "explained*1|what we know*1");
  g.add("hot_verb", "responds to|weighs in on|defends stance on|speaks about|reacts to");
  g.add("hot_reaction", "what it means for {place}|reaction in {place}|experts respond|the fallout");
  g.add("hot_people", "residents|leaders|families|students|business owners");
}

Date random_date(int year, Rng& rng) {
  std::uniform_int_distribution<int> m(1, 12);
  while (true) {
    int mm = m(rng);
    std::uniform_int_distribution<int> d(1, 31);
    int dd = d(rng);
    if (is_valid_date(year, mm, dd)) return Date{year, mm, dd};
  }
}

}  // namespace

std::vector<corpus::Headline> generate_corpus(const SynthConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<corpus::Headline> out;
  for (int year = cfg.first_year; year <= cfg.last_year; ++year) {
    Grammar g;
    base_rules(g);
    year_rules(g, year);
    const auto& lex = lexicons();
    const Lexicon first_names = drifted(lex.first_names, year, 200);
    const Lexicon surnames = drifted(lex.surnames, year, 300);
    g.lexicons = {{"first_name", &first_names}, {"surname", &surnames}, {"town", &lex.towns},
                  {"rare_noun", &lex.rare_nouns}};
    std::vector<corpus::Headline> batch;
    batch.reserve(cfg.per_year);
    for (std::size_t i = 0; i < cfg.per_year; ++i) {
      std::string text = g.expand("headline", rng);
      batch.push_back(corpus::make_headline(text, random_date(year, rng), corpus::Label::real));
    }
    std::stable_sort(batch.begin(), batch.end(), [](const auto& a, const auto& b) {
      return a.publish_date < b.publish_date;
    });
    out.insert(out.end(), batch.begin(), batch.end());
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const SynthConfig& cfg) {
  corpus::write_corpus_csv(path, generate_corpus(cfg));
}

}  // namespace hldet::synth
