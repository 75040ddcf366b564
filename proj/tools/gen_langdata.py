#!/usr/bin/env python3
"""Builds the language-identification training samples in data/lang/.

Text is assembled from handwritten sentences and word pools with a fixed
seed, so rerunning the script reproduces the files byte for byte.
"""
import pathlib
import random
import sys

TARGET_BYTES = 120 * 1024

CES = {
    "sentences": [
        "Dnes ráno pršelo a na ulicích stály velké kaluže.",
        "Babička upekla koláč s tvarohem a meruňkami.",
        "Vlak do Brna měl zpoždění skoro dvacet minut.",
        "Ve škole jsme se učili o historii českých zemí.",
        "Můj bratr pracuje jako lékař v nemocnici v Olomouci.",
        "Na horách napadlo hodně sněhu a lyžaři jsou spokojení.",
        "Večer jsme seděli u ohně a zpívali staré písně.",
        "Knihovna bude o prázdninách otevřena jen dopoledne.",
        "Starosta obce slíbil opravit most přes řeku.",
        "Děti si hrály na zahradě až do setmění.",
        "Cena chleba se během roku znovu zvýšila.",
        "V pondělí začne rekonstrukce náměstí v centru města.",
        "Přečetl jsem zajímavý článek o ochraně přírody.",
        "Sousedův pes štěká pokaždé, když jde kolem pošťák.",
        "Letos jsme na dovolenou jeli k moři do Chorvatska.",
        "Vědci zkoumají, proč včely mizí z naší krajiny.",
        "Na trhu prodávali čerstvou zeleninu, ovoce a květiny.",
        "Po dlouhé zimě konečně přišlo teplé jarní počasí.",
        "Tenhle týden mám hodně práce, ale v pátek si odpočinu.",
        "Maminka volala, že přijede v neděli odpoledne.",
        "Fotbalisté Sparty vyhráli zápas dvě ku jedné.",
        "Vláda schválila nový zákon o podpoře malých podniků.",
        "Čeština patří mezi západoslovanské jazyky.",
        "Hrad Karlštejn navštíví každý rok tisíce turistů.",
        "Kdo chce jít se mnou zítra do divadla?",
        "Nezapomeň si vzít deštník, venku je zataženo!",
        "Ve sklepě jsme našli staré dopisy po dědečkovi.",
        "Řidič autobusu zastavil, aby pomohl starší paní.",
        "Hudba zněla celou noc až do rána.",
        "Učitelka pochválila žáky za pěkné výsledky.",
        "Mlékárna v naší vesnici vyrábí výborný sýr.",
        "Zítra bude polojasno a teploty vystoupí k dvaceti stupňům.",
        "Studenti psali test z matematiky a fyziky.",
        "Ještě jsme se nerozhodli, kam pojedeme na výlet.",
        "Město vysadilo v parku stovky nových stromů.",
        "Lékaři doporučují pít hodně vody a pravidelně cvičit.",
        "Přes zimu jsme opravili střechu i komín.",
        "Ve čtvrtek se koná schůze všech nájemníků domu.",
        "Žádný den není stejný jako ten předchozí.",
        "Chtěl bych si koupit nové kolo, ale je příliš drahé.",
        "Pražský orloj je jednou z nejznámějších památek.",
        "Řeka Vltava protéká Českými Budějovicemi i Prahou.",
        "Někteří lidé raději čtou knihy než sledují televizi.",
        "Firma hledá nové zaměstnance do výroby i do kanceláře.",
        "Každé ráno piju kávu s mlékem a jím rohlík s máslem.",
        "Sestra studuje medicínu na univerzitě v Hradci Králové.",
        "Během bouřky vypadl proud v celé čtvrti.",
        "Ptáci se na podzim stěhují do teplých krajin.",
    ],
    "subjects": ["můj soused", "naše rodina", "starý rybář", "mladá učitelka", "celá třída", "ředitel školy",
                 "kamarádka Jana", "pan Novák", "paní Dvořáková", "dědeček", "malý chlapec", "obecní úřad",
                 "místní knihovník", "každý návštěvník", "většina obyvatel", "sestřenice z Plzně", "tým vědců",
                 "zahradník", "hasiči", "děti ze školky", "pekař na rohu", "průvodce", "novinář", "farmář"],
    "verbs": ["připravil", "koupila", "opravil", "navštívili", "uklidila", "hledal", "našel", "prodal",
              "popsala", "vysvětlil", "nakreslila", "postavili", "zasadil", "objevili", "zorganizoval",
              "přinesla", "vyfotografoval", "přestavěli", "ochutnali", "uvařila", "doporučil", "přečetla"],
    "objects": ["nový plot kolem zahrady", "starou dřevěnou skříň", "zajímavou výstavu obrazů",
                "polévku z čerstvé zeleniny", "cestu k rybníku", "mapu okolních lesů", "dopis pro babičku",
                "krásné jarní květiny", "malý domek u řeky", "stůl v kuchyni", "zprávu o počasí",
                "recept na bramborové knedlíky", "kostel na návsi", "hřiště pro děti", "zámek v jižních Čechách",
                "levné jízdenky na vlak", "příběh o statečném rytíři", "starou fotografii města",
                "výsledky letošní sklizně", "hnízdo v koruně stromu", "cvičení z češtiny", "vůni čerstvého chleba"],
    "tails": ["včera odpoledne", "minulý týden", "hned po snídani", "před Vánocemi", "v sobotu ráno",
              "během prázdnin", "za pěkného počasí", "na konci léta", "bez velkých potíží", "s velkou radostí",
              "už podruhé", "ke spokojenosti všech", "navzdory dešti", "po dlouhém přemýšlení", "u nás ve městě"],
    "clauses": ["protože to bylo potřeba", "aby měli radost", "i když byl unavený", "než se setmělo",
                "jak slíbil sousedům", "když přestalo pršet", "zatímco ostatní odpočívali",
                "ačkoli to nebylo jednoduché", "který všichni znají", "jakmile dostal zprávu"],
}

ENG = {
    "sentences": [
        "It rained this morning and there were large puddles in the streets.",
        "Grandmother baked an apple pie with cinnamon and raisins.",
        "The train to Manchester was delayed by almost twenty minutes.",
        "At school we learned about the history of the industrial revolution.",
        "My brother works as a doctor at the hospital in Leeds.",
        "A lot of snow fell in the mountains and the skiers are happy.",
        "In the evening we sat by the fire and sang old songs.",
        "The library will only be open in the mornings during the holidays.",
        "The mayor promised to repair the bridge across the river.",
        "The children played in the garden until it got dark.",
        "The price of bread rose again during the year.",
        "Reconstruction of the town square will begin on Monday.",
        "I read an interesting article about nature conservation.",
        "The neighbour's dog barks every time the postman walks past.",
        "This year we went on holiday to the seaside in Cornwall.",
        "Scientists are studying why bees are disappearing from the countryside.",
        "The market sold fresh vegetables, fruit and flowers.",
        "After a long winter the warm spring weather finally arrived.",
        "I have a lot of work this week, but on Friday I will rest.",
        "Mother called to say that she would arrive on Sunday afternoon.",
        "The football team won the match two goals to one.",
        "The government approved a new law supporting small businesses.",
        "English belongs to the West Germanic branch of languages.",
        "Thousands of tourists visit the castle every year.",
        "Who wants to go to the theatre with me tomorrow?",
        "Don't forget your umbrella, it is cloudy outside!",
        "In the cellar we found old letters written by our grandfather.",
        "The bus driver stopped to help an elderly lady.",
        "The music played all night until the morning.",
        "The teacher praised the pupils for their good results.",
        "Tomorrow will be partly sunny with temperatures around twenty degrees.",
        "Students took an exam in mathematics and physics.",
        "We still have not decided where to go on our trip.",
        "The city planted hundreds of new trees in the park.",
        "Doctors recommend drinking plenty of water and exercising regularly.",
        "Over the winter we repaired both the roof and the chimney.",
        "Every morning I drink coffee with milk and eat toast with butter.",
        "During the storm the power went out in the whole district.",
        "Birds migrate to warmer countries in the autumn.",
        "The company is looking for new employees for the factory and the office.",
    ],
    "subjects": ["my neighbour", "our family", "the old fisherman", "the young teacher", "the whole class",
                 "the headmaster", "my friend Sarah", "Mr Thompson", "Mrs Wilson", "grandfather", "a little boy",
                 "the town council", "the local librarian", "every visitor", "most residents", "my cousin",
                 "a team of scientists", "the gardener", "the firefighters", "the baker on the corner", "the guide"],
    "verbs": ["prepared", "bought", "repaired", "visited", "cleaned", "looked for", "found", "sold", "described",
              "explained", "painted", "built", "planted", "discovered", "organised", "brought", "photographed",
              "rebuilt", "tasted", "cooked", "recommended", "wrote about"],
    "objects": ["a new fence around the garden", "an old wooden wardrobe", "an interesting art exhibition",
                "soup made from fresh vegetables", "the path to the pond", "a map of the nearby woods",
                "a letter for grandmother", "beautiful spring flowers", "a small house by the river",
                "the kitchen table", "the weather report", "a recipe for potato dumplings", "the village church",
                "a playground for children", "a castle in the south", "cheap train tickets",
                "a story about a brave knight", "an old photograph of the town", "the results of the harvest"],
    "tails": ["yesterday afternoon", "last week", "right after breakfast", "before Christmas", "on Saturday morning",
              "during the holidays", "in fine weather", "at the end of summer", "without much trouble",
              "with great pleasure", "for the second time", "to everyone's satisfaction", "despite the rain",
              "after a long think", "here in our town"],
    "clauses": ["because it was necessary", "so that they would be happy", "even though he was tired",
                "before it got dark", "as he had promised the neighbours", "when the rain stopped",
                "while the others were resting", "although it was not easy", "which everyone knows",
                "as soon as the news arrived"],
}

DEU = {
    "sentences": [
        "Heute Morgen hat es geregnet und auf den Straßen standen große Pfützen.",
        "Die Großmutter hat einen Apfelkuchen mit Zimt gebacken.",
        "Der Zug nach München hatte fast zwanzig Minuten Verspätung.",
        "In der Schule haben wir über die Geschichte Europas gelernt.",
        "Mein Bruder arbeitet als Arzt im Krankenhaus in Leipzig.",
        "In den Bergen ist viel Schnee gefallen und die Skifahrer sind zufrieden.",
        "Am Abend saßen wir am Feuer und sangen alte Lieder.",
        "Die Bibliothek ist in den Ferien nur vormittags geöffnet.",
        "Der Bürgermeister versprach, die Brücke über den Fluss zu reparieren.",
        "Die Kinder spielten im Garten, bis es dunkel wurde.",
        "Der Brotpreis ist im Laufe des Jahres wieder gestiegen.",
        "Am Montag beginnt der Umbau des Marktplatzes in der Innenstadt.",
        "Ich habe einen interessanten Artikel über Naturschutz gelesen.",
        "Der Hund des Nachbarn bellt jedes Mal, wenn der Briefträger vorbeikommt.",
        "Dieses Jahr sind wir in den Urlaub an die Ostsee gefahren.",
        "Wissenschaftler untersuchen, warum die Bienen aus unserer Landschaft verschwinden.",
        "Auf dem Markt wurden frisches Gemüse, Obst und Blumen verkauft.",
        "Nach einem langen Winter kam endlich das warme Frühlingswetter.",
        "Diese Woche habe ich viel Arbeit, aber am Freitag ruhe ich mich aus.",
        "Die Mutter rief an und sagte, sie komme am Sonntagnachmittag.",
        "Die Fußballmannschaft gewann das Spiel zwei zu eins.",
        "Die Regierung hat ein neues Gesetz zur Förderung kleiner Unternehmen beschlossen.",
        "Deutsch gehört zu den westgermanischen Sprachen.",
        "Jedes Jahr besuchen Tausende von Touristen die Burg.",
        "Wer möchte morgen mit mir ins Theater gehen?",
        "Vergiss deinen Regenschirm nicht, draußen ist es bewölkt!",
        "Im Keller fanden wir alte Briefe unseres Großvaters.",
        "Der Busfahrer hielt an, um einer älteren Dame zu helfen.",
        "Die Musik spielte die ganze Nacht bis zum Morgen.",
        "Die Lehrerin lobte die Schüler für ihre guten Ergebnisse.",
        "Morgen wird es heiter bis wolkig bei Temperaturen um zwanzig Grad.",
        "Die Studenten schrieben eine Prüfung in Mathematik und Physik.",
        "Wir haben noch nicht entschieden, wohin wir einen Ausflug machen.",
        "Die Stadt hat im Park Hunderte neuer Bäume gepflanzt.",
        "Ärzte empfehlen, viel Wasser zu trinken und regelmäßig Sport zu treiben.",
        "Über den Winter haben wir das Dach und den Schornstein repariert.",
        "Jeden Morgen trinke ich Kaffee mit Milch und esse ein Brötchen mit Butter.",
        "Während des Gewitters fiel im ganzen Viertel der Strom aus.",
        "Die Vögel ziehen im Herbst in wärmere Länder.",
        "Die Firma sucht neue Mitarbeiter für die Produktion und das Büro.",
    ],
    "subjects": ["mein Nachbar", "unsere Familie", "der alte Fischer", "die junge Lehrerin", "die ganze Klasse",
                 "der Schulleiter", "meine Freundin Anna", "Herr Schmidt", "Frau Müller", "der Großvater",
                 "ein kleiner Junge", "der Gemeinderat", "der örtliche Bibliothekar", "jeder Besucher",
                 "die meisten Einwohner", "mein Vetter", "ein Team von Forschern", "der Gärtner", "die Feuerwehr"],
    "verbs": ["bereitete", "kaufte", "reparierte", "besuchte", "putzte", "suchte", "fand", "verkaufte",
              "beschrieb", "erklärte", "malte", "baute", "pflanzte", "entdeckte", "organisierte", "brachte",
              "fotografierte", "kochte", "empfahl", "probierte"],
    "objects": ["einen neuen Zaun um den Garten", "einen alten hölzernen Schrank", "eine interessante Ausstellung",
                "eine Suppe aus frischem Gemüse", "den Weg zum Teich", "eine Karte der nahen Wälder",
                "einen Brief für die Großmutter", "schöne Frühlingsblumen", "ein kleines Haus am Fluss",
                "den Küchentisch", "den Wetterbericht", "ein Rezept für Kartoffelknödel", "die Dorfkirche",
                "einen Spielplatz für Kinder", "ein Schloss im Süden", "günstige Fahrkarten",
                "eine Geschichte über einen tapferen Ritter", "ein altes Foto der Stadt", "die Ergebnisse der Ernte"],
    "tails": ["gestern Nachmittag", "letzte Woche", "gleich nach dem Frühstück", "vor Weihnachten",
              "am Samstagmorgen", "während der Ferien", "bei schönem Wetter", "am Ende des Sommers",
              "ohne große Mühe", "mit großer Freude", "zum zweiten Mal", "zur Zufriedenheit aller",
              "trotz des Regens", "nach langem Überlegen", "bei uns in der Stadt"],
    "clauses": ["weil es nötig war", "damit sie sich freuen", "obwohl er müde war", "bevor es dunkel wurde",
                "wie er den Nachbarn versprochen hatte", "als der Regen aufhörte", "während die anderen ruhten",
                "obwohl es nicht einfach war", "den alle kennen", "sobald die Nachricht kam"],
}


def sentence(pool, rng):
    if rng.random() < 0.35:
        return rng.choice(pool["sentences"])
    s = f"{rng.choice(pool['subjects'])} {rng.choice(pool['verbs'])} {rng.choice(pool['objects'])}"
    if rng.random() < 0.6:
        s += f" {rng.choice(pool['tails'])}"
    if rng.random() < 0.4:
        s += f", {rng.choice(pool['clauses'])}"
    return s[0].upper() + s[1:] + rng.choice([".", ".", ".", "!", "?"] if rng.random() < 0.1 else ["."])


def build(pool, seed):
    rng = random.Random(seed)
    paragraphs = []
    size = 0
    while size < TARGET_BYTES:
        p = " ".join(sentence(pool, rng) for _ in range(rng.randint(3, 7)))
        paragraphs.append(p)
        size += len(p.encode("utf-8")) + 1
    return "\n".join(paragraphs) + "\n"


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/lang")
    out.mkdir(parents=True, exist_ok=True)
    for code, pool, seed in (("ces", CES, 1), ("eng", ENG, 2), ("deu", DEU, 3)):
        (out / f"{code}.txt").write_text(build(pool, seed), encoding="utf-8")


if __name__ == "__main__":
    main()
