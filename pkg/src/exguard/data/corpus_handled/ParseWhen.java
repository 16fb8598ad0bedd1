import java.text.SimpleDateFormat;
import java.util.Date;

public class ParseWhen {
    public static void main(String[] args) {
        String rawDate = args[0];
        try {
            Date when = new SimpleDateFormat("yyyy-MM-dd").parse(rawDate);
        } catch (ParseException ex) {
            System.err.println("Unparseable text at offset " + ex.getErrorOffset() + ": " + ex.getMessage());
            ex.printStackTrace();
        }
        System.out.println("parsed date: " + when);
    }
}
